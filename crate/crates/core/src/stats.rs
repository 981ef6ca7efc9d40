//! Scalar distribution helpers shared across modules.

use std::f64::consts::PI;

use statrs::distribution::{ContinuousCDF, Normal};

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        standard_normal().cdf(x)
    }
}

/// Standard normal quantile; maps 0 and 1 to the infinities. One Newton
/// step polishes the library estimate to near machine precision.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        let n = standard_normal();
        let x = n.inverse_cdf(p);
        let density = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        if density > 0.0 {
            x - (n.cdf(x) - p) / density
        } else {
            x
        }
    }
}

pub fn ln_factorial(k: u64) -> f64 {
    statrs::function::factorial::ln_factorial(k)
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log Σ exp(x_i)` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

const GL_X: [&[f64]; 3] = [
    &[-0.9324695142031522, -0.6612093864662647, -0.2386191860831970],
    &[
        -0.9815606342467191,
        -0.9041172563704750,
        -0.7699026741943050,
        -0.5873179542866171,
        -0.3678314989981802,
        -0.1252334085114692,
    ],
    &[
        -0.9931285991850949,
        -0.9639719272779138,
        -0.9122344282513259,
        -0.8391169718222188,
        -0.7463319064601508,
        -0.6360536807265150,
        -0.5108670019508271,
        -0.3737060887154196,
        -0.2277858511416451,
        -0.07652652113349733,
    ],
];

const GL_W: [&[f64]; 3] = [
    &[0.1713244923791705, 0.3607615730481384, 0.4679139345726904],
    &[
        0.04717533638651177,
        0.1069393259953183,
        0.1600783285433464,
        0.2031674267230659,
        0.2334925365383547,
        0.2491470458134029,
    ],
    &[
        0.01761400713915212,
        0.04060142980038694,
        0.06267204833410906,
        0.08327674157670475,
        0.1019301198172404,
        0.1181945319615184,
        0.1316886384491766,
        0.1420961093183821,
        0.1491729864726037,
        0.1527533871307259,
    ],
];

/// Upper orthant probability `P(X > h, Y > k)` for a standard bivariate
/// normal with correlation `r`, by Genz's Gauss-Legendre scheme.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return norm_cdf(-k);
    }
    if k == f64::NEG_INFINITY {
        return norm_cdf(-h);
    }
    let ng = if r.abs() < 0.3 {
        0
    } else if r.abs() < 0.75 {
        1
    } else {
        2
    };
    let (xs, ws) = (GL_X[ng], GL_W[ng]);
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (x, w) in xs.iter().zip(ws) {
            for sign in [-1.0, 1.0] {
                let sn = (asr * (sign * x + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (4.0 * PI) + norm_cdf(-h) * norm_cdf(-k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -(bs / a_s + hk) / 2.0;
        if asr > -100.0 {
            bvn = a * asr.exp() * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if -hk < 100.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp() * (2.0 * PI).sqrt() * norm_cdf(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (x, w) in xs.iter().zip(ws) {
            for sign in [-1.0, 1.0] {
                let xs2 = (a * (sign * x + 1.0)).powi(2);
                let rs = (1.0 - xs2).sqrt();
                let asr = -(bs / xs2 + hk) / 2.0;
                if asr > -100.0 {
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs2 * (1.0 + d * xs2)));
                }
            }
        }
        bvn = -bvn / (2.0 * PI);
    }
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        let mut out = -bvn;
        if k > h {
            out += norm_cdf(k) - norm_cdf(h);
        }
        out
    }
}

/// `P(X <= x, Y <= y)` for a standard bivariate normal with correlation `r`.
pub fn bvn_cdf(x: f64, y: f64, r: f64) -> f64 {
    bvn_upper(-x, -y, r).clamp(0.0, 1.0)
}

/// `P(a1 < X <= b1, a2 < Y <= b2)`.
pub fn bvn_rectangle(a1: f64, b1: f64, a2: f64, b2: f64, r: f64) -> f64 {
    let p = bvn_cdf(b1, b2, r) - bvn_cdf(a1, b2, r) - bvn_cdf(b1, a2, r) + bvn_cdf(a1, a2, r);
    p.max(0.0)
}

/// Two-sample Kolmogorov-Smirnov distance between an empirical sample and
/// a reference CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force `P(X <= x, Y <= y)` by integrating the conditional normal.
    fn bvn_quadrature(x: f64, y: f64, r: f64) -> f64 {
        let lo = -9.0f64;
        let steps = 20_000;
        let h = (x.min(9.0) - lo) / steps as f64;
        let s = (1.0 - r * r).sqrt();
        let f = |t: f64| (-t * t / 2.0).exp() / (2.0 * PI).sqrt() * norm_cdf((y - r * t) / s);
        let mut acc = f(lo) + f(x.min(9.0));
        for i in 1..steps {
            let t = lo + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
        }
        acc * h / 3.0
    }

    #[test]
    fn orthant_closed_form() {
        for r in [-0.99, -0.95, -0.8, -0.5, -0.1, 0.0, 0.2, 0.5, 0.8, 0.93, 0.999] {
            let expect = 0.25 + f64::asin(r) / (2.0 * PI);
            assert!((bvn_cdf(0.0, 0.0, r) - expect).abs() < 1e-14, "r = {r}");
        }
    }

    #[test]
    fn matches_quadrature() {
        for &(x, y) in &[(-1.3, 0.4), (0.7, 2.1), (-2.5, -0.2), (1.5, 1.5)] {
            for r in [-0.97, -0.6, 0.1, 0.5, 0.85, 0.96] {
                let got = bvn_cdf(x, y, r);
                let want = bvn_quadrature(x, y, r);
                assert!((got - want).abs() < 1e-9, "({x}, {y}, {r}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn rectangle_marginals() {
        let p = bvn_rectangle(f64::NEG_INFINITY, 0.3, f64::NEG_INFINITY, f64::INFINITY, 0.7);
        assert!((p - norm_cdf(0.3)).abs() < 1e-14);
        let total = bvn_rectangle(f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, -0.4);
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_helpers() {
        assert!((expit(logit(0.3)) - 0.3).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((ln_factorial(2) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(norm_quantile(0.5), 0.0);
        for p in [1e-8, 0.01, 0.3, 0.8, 0.95, 0.999999] {
            assert!((norm_cdf(norm_quantile(p)) - p).abs() < 1e-15 * p.max(1e-2) * 10.0);
        }
        assert!((variance(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        let u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_distance(&u, |x| x) <= 0.0005 + 1e-12);
    }
}
