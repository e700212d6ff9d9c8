use num_bigint::BigUint;
use yardloc::capital_recovery_factor;

/// r(1+r)^T / ((1+r)^T - 1) for r = num/den, as an exact fraction scaled by
/// 10^digits.
fn crf_scaled(num: u32, den: u32, lifetime: u32, digits: u32) -> BigUint {
    let a = BigUint::from(num + den).pow(lifetime);
    let b = BigUint::from(den).pow(lifetime);
    let top = BigUint::from(num) * &a * BigUint::from(10u32).pow(digits);
    let bottom = BigUint::from(den) * (a - b);
    top / bottom
}

fn crf_oracle(num: u32, den: u32, lifetime: u32) -> f64 {
    let digits = 30;
    let scaled: f64 = crf_scaled(num, den, lifetime, digits)
        .to_string()
        .parse()
        .unwrap();
    scaled / 10f64.powi(digits as i32)
}

#[test]
fn matches_exact_rational() {
    for (num, den) in [(1, 10), (1, 20), (3, 100), (1, 4)] {
        for t in [1, 2, 5, 20, 30, 60] {
            let rate = num as f64 / den as f64;
            let got = capital_recovery_factor(rate, t).unwrap();
            let want = crf_oracle(num, den, t);
            assert!(
                (got - want).abs() <= 1e-12 * want,
                "{rate} {t}: {got} vs {want}"
            );
        }
    }
    assert!((capital_recovery_factor(0.1, 20).unwrap() - crf_oracle(1, 10, 20)).abs() < 1e-9);
}
