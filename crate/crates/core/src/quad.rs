//! Adaptive Gauss–Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = kronrod(f, a, b);
        if err <= tol || depth == 0 || (b - a) <= f64::EPSILON * a.abs().max(1.0) * 64.0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, tol * 0.5, depth - 1) + rec(f, m, b, tol * 0.5, depth - 1)
    }
    rec(&f, a, b, tol, 48)
}

/// Integral of `f` over `[a, b]` to a tolerance relative to a first
/// single-panel estimate of its magnitude.
pub(crate) fn integrate_relative<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (rough, _) = kronrod(&f, a, b);
    integrate(f, a, b, (rel * rough.abs()).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        assert!((integrate(|x| x * x, 0.0, 3.0, 1e-14) - 9.0).abs() < 1e-12);
        assert!((integrate(|x| (-x).exp(), 0.0, 50.0, 1e-14) - (1.0 - (-50f64).exp())).abs() < 1e-12);
        assert!((integrate(|x| x.sqrt(), 0.0, 1.0, 1e-12) - 2.0 / 3.0).abs() < 1e-10);
        assert_eq!(integrate(|x| x, 2.0, 1.0, 1e-9), 0.0);
        let big = integrate_relative(|x| 1e7 * (-x).exp(), 0.0, 1.0, 1e-13);
        assert!((big / (1e7 * (1.0 - (-1f64).exp())) - 1.0).abs() < 1e-12);
    }
}
