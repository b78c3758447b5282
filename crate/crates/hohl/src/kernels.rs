//! Radial kernels and their moment constants.
//!
//! The continuum limits of the discrete energies and operators are governed
//! by moments of the kernel profile. This module evaluates them three ways:
//! a 1-d radial quadrature where sphericity makes that exact, blocked Monte
//! Carlo for the genuinely k-fold integrals, and closed-form Gamma-function
//! bounds that sandwich the Monte Carlo values.

use crate::derive_seed;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Cut-off radius of the truncated exponential kernel, chosen so the profile
/// value at the cut-off is 1e-8.
pub const TRUNCATION_RADIUS: f64 = 2.145_966_026_289_347;

/// Radial kernel profile `eta(t)` for `t >= 0`. All profiles take values in
/// `[0, 1]`, are non-increasing, and satisfy `eta(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// 1 on `[0, 1]`, 0 beyond.
    Indicator,
    /// `exp(-4 t^2)` with unbounded support. Positive for every pair of
    /// points, so it builds fully connected graphs; rejected by operations
    /// that need a finite interaction radius.
    ExpGaussian,
    /// `exp(-4 t^2)` cut to zero beyond [`TRUNCATION_RADIUS`].
    TruncatedExpGaussian,
}

impl Kernel {
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        match self {
            Kernel::Indicator => {
                if t <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::ExpGaussian => (-4.0 * t * t).exp(),
            Kernel::TruncatedExpGaussian => {
                if t <= TRUNCATION_RADIUS {
                    (-4.0 * t * t).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Radius beyond which the profile vanishes; `None` for the untruncated
    /// exponential.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Kernel::Indicator => Some(1.0),
            Kernel::ExpGaussian => None,
            Kernel::TruncatedExpGaussian => Some(TRUNCATION_RADIUS),
        }
    }

    pub fn is_compact(&self) -> bool {
        self.support_radius().is_some()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Indicator => "indicator",
            Kernel::ExpGaussian => "exp-gaussian",
            Kernel::TruncatedExpGaussian => "truncated-exp-gaussian",
        }
    }

    pub fn parse(name: &str) -> Result<Kernel> {
        match name {
            "indicator" => Ok(Kernel::Indicator),
            "exp-gaussian" => Ok(Kernel::ExpGaussian),
            "truncated-exp-gaussian" => Ok(Kernel::TruncatedExpGaussian),
            other => Err(Error::invalid(format!(
                "unknown kernel '{}', expected indicator, exp-gaussian, or truncated-exp-gaussian",
                other
            ))),
        }
    }

    /// Radius used when integrating radially: the support radius, or a point
    /// far enough into the exponential tail that the remainder is below f64
    /// resolution.
    fn integration_radius(&self) -> f64 {
        self.support_radius().unwrap_or(12.0)
    }
}

/// Gamma function at half-integer arguments, `gamma(two_x / 2)`. Every Gamma
/// factor in this module has an argument that is a multiple of one half, so
/// the recursion from `gamma(1/2) = sqrt(pi)` and `gamma(1) = 1` is exact.
pub(crate) fn gamma_half(two_x: u32) -> f64 {
    assert!(two_x >= 1, "gamma argument must be positive");
    match two_x {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (two_x as f64 / 2.0 - 1.0) * gamma_half(two_x - 2),
    }
}

/// Surface area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d as u32)
}

/// Volume of the ball of radius `r` in `R^d`.
fn ball_volume(d: usize, r: f64) -> f64 {
    sphere_area(d) / d as f64 * r.powi(d as i32)
}

/// Composite Simpson rule with `panels` panels (must be even and >= 2).
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 2 && panels % 2 == 0);
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Radial moment `int_0^R eta(r) r^e dr` by quadrature.
pub fn radial_moment(kernel: Kernel, exponent: f64) -> f64 {
    simpson(
        |r| kernel.eval(r) * r.powf(exponent),
        0.0,
        kernel.integration_radius(),
        4096,
    )
}

/// Second-moment constant `(1/d) int_{R^d} eta(|h|) |h|^2 dh`, the calibration
/// factor relating the graph Laplacian to the continuum Laplacian. Computed
/// by exact radial reduction plus 1-d quadrature.
pub fn sigma_eta(kernel: Kernel, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    Ok(sphere_area(d) / d as f64 * radial_moment(kernel, d as f64 + 1.0))
}

/// Exact evaluation of the order-one density constants by radial quadrature
/// and half-integer Gamma factors: returns `(sigma, sigma_1)` where
/// `sigma = int eta(|z|) |z_d|^p dz` and
/// `sigma_1 = int eta(|z|) |z_d|^{p-2} z_1^2 dz`. For d = 1 the second
/// integral is defined by continuation in d of its Gamma-function
/// evaluation, which fixes the exact ratio `sigma / sigma_1 = p - 1` in
/// every dimension. Only integer p >= 2 keeps the angular factors in
/// half-integer Gamma territory.
pub fn sigma_k1_quadrature(kernel: Kernel, d: usize, p: u32) -> Result<(f64, f64)> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if p < 2 {
        return Err(Error::invalid("exponent p must be at least 2"));
    }
    let radial = radial_moment(kernel, (p as usize + d - 1) as f64);
    let du = d as u32;
    // angular moment: int_{S^{d-1}} |w_d|^p dw
    let angular = 2.0 * gamma_half(p + 1) * gamma_half(1).powi(d as i32 - 1)
        / gamma_half(p + du);
    let sigma = radial * angular;
    let sigma_1 = if d == 1 {
        sigma / (p as f64 - 1.0)
    } else {
        // angular moment: int_{S^{d-1}} |w_d|^{p-2} w_1^2 dw
        let ang = 2.0 * gamma_half(p - 1) * gamma_half(3) * gamma_half(1).powi(d as i32 - 2)
            / gamma_half(p + du);
        radial * ang
    };
    Ok((sigma, sigma_1))
}

/// Monte Carlo cross-check of [`sigma_eta`]: returns the estimate and its
/// standard error. Needs a compactly supported kernel to define the uniform
/// proposal.
pub fn sigma_eta_mc(kernel: Kernel, d: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let r = kernel
        .support_radius()
        .ok_or_else(|| Error::invalid("Monte Carlo needs a compactly supported kernel"))?;
    if d == 0 || samples == 0 {
        return Err(Error::invalid("need d >= 1 and samples >= 1"));
    }
    let vol = ball_volume(d, r);
    let (sum, sum_sq) = mc_blocks(samples, seed, |rng, acc: &mut (f64, f64)| {
        let z = sample_ball(rng, d, r);
        let n2: f64 = z.iter().map(|v| v * v).sum();
        let f = kernel.eval(n2.sqrt()) * n2 / d as f64;
        acc.0 += f;
        acc.1 += f * f;
    });
    let mean = sum / samples as f64;
    let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
    Ok((mean * vol, (var / samples as f64).sqrt() * vol))
}

/// One Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
}

/// Kernel moment constants appearing in the continuum operators, estimated by
/// blocked Monte Carlo. Serialized as JSON by the `constants` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelConstants {
    pub kernel: String,
    pub d: usize,
    pub k: usize,
    pub p: u32,
    /// Quadrature value, exact up to 1-d integration error.
    pub sigma_eta: f64,
    /// Energy-scaling constant, estimated along a rotated unit direction as
    /// an isotropy check; should agree with `sigma_kp` within error bars.
    pub sigma_k: McEstimate,
    /// `int etatilde(z) |z1 . e_d|^p dz`.
    pub sigma_kp: McEstimate,
    /// `int etatilde(z) |z1 . e_d|^{p-2} (z1 . e_1)^2 dz`.
    pub sigma_kp1: McEstimate,
    /// `int etatilde(z) |z1 . e_d|^{p-2} (z1 . e_d)(z2 . e_d) dz`; zero when
    /// `k = 1` since there is no second block.
    pub sigma_kp2: McEstimate,
    pub mc_samples: usize,
    pub seed: u64,
}

const MC_BLOCK: usize = 1 << 16;

/// Runs `samples` Monte Carlo draws in fixed-size blocks with per-block RNG
/// streams derived from `seed`. Blocks are evaluated in parallel but reduced
/// in block order, so the result is bitwise identical for any thread count.
fn mc_blocks<A: Accumulate>(
    samples: usize,
    seed: u64,
    body: impl Fn(&mut ChaCha8Rng, &mut A) + Sync,
) -> A {
    let blocks = samples.div_ceil(MC_BLOCK);
    let partials: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b as u64]));
            let mut acc = A::default();
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            for _ in 0..count {
                body(&mut rng, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = A::default();
    for p in partials {
        total.merge(p);
    }
    total
}

/// Accumulator that can merge partial sums; merging happens sequentially.
trait Accumulate: Default + Send {
    fn merge(&mut self, other: Self);
}

impl Accumulate for (f64, f64) {
    fn merge(&mut self, o: Self) {
        self.0 += o.0;
        self.1 += o.1;
    }
}

#[derive(Default)]
struct ConstSums {
    // per-integrand sums and sums of squares
    k_: (f64, f64),
    kp: (f64, f64),
    kp1: (f64, f64),
    kp2: (f64, f64),
}

impl Accumulate for ConstSums {
    fn merge(&mut self, o: Self) {
        self.k_.merge(o.k_);
        self.kp.merge(o.kp);
        self.kp1.merge(o.kp1);
        self.kp2.merge(o.kp2);
    }
}

/// One standard normal via Box-Muller; uses two uniforms per call.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform draw from the ball of radius `r` in `R^d`: normalized Gaussian
/// direction times radius `r * U^(1/d)`.
fn sample_ball(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Vec<f64> {
    let mut z: Vec<f64>;
    loop {
        z = (0..d).map(|_| standard_normal(rng)).collect();
        let n: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            let radius = r * rng.gen::<f64>().powf(1.0 / d as f64);
            for v in z.iter_mut() {
                *v *= radius / n;
            }
            return z;
        }
    }
}

/// `|t|^(p-2)` with the `p = 2` case pinned to exactly 1, including at t = 0.
fn abs_pow_pm2(t: f64, p: u32) -> f64 {
    if p == 2 {
        1.0
    } else {
        t.abs().powi(p as i32 - 2)
    }
}

/// Estimates the moment constants of the k-fold kernel product
/// `etatilde(z_1..z_k) = prod_s eta(|z_s|) * prod_{r<j} eta(|z_j - z_r|)`
/// by Monte Carlo over the product of support balls.
///
/// Preconditions: compactly supported kernel, `d, k >= 1`, `p >= 2`.
pub fn kernel_constants(
    kernel: Kernel,
    d: usize,
    k: usize,
    p: u32,
    mc_samples: usize,
    seed: u64,
) -> Result<KernelConstants> {
    let r = kernel.support_radius().ok_or_else(|| {
        Error::invalid(
            "kernel constants need a compactly supported kernel; use truncated-exp-gaussian \
             in place of exp-gaussian",
        )
    })?;
    if d == 0 || k == 0 {
        return Err(Error::invalid("need d >= 1 and k >= 1"));
    }
    if p < 2 {
        return Err(Error::invalid("need p >= 2"));
    }
    if mc_samples == 0 {
        return Err(Error::invalid("need at least one Monte Carlo sample"));
    }

    // rotated unit direction for the isotropy estimate; any unit vector works
    let e: Vec<f64> = {
        let v = vec![1.0; d];
        let n = (d as f64).sqrt();
        v.into_iter().map(|x| x / n).collect()
    };

    let vol = ball_volume(d, r).powi(k as i32);
    let sums = mc_blocks(mc_samples, seed, |rng, acc: &mut ConstSums| {
        let zs: Vec<Vec<f64>> = (0..k).map(|_| sample_ball(rng, d, r)).collect();
        let mut w = 1.0;
        for z in &zs {
            let n: f64 = z.iter().map(|v| v * v).sum::<f64>();
            w *= kernel.eval(n.sqrt());
        }
        for j in 1..k {
            for rr in 0..j {
                let n: f64 = zs[j]
                    .iter()
                    .zip(&zs[rr])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                w *= kernel.eval(n.sqrt());
            }
        }
        let a1 = zs[0][d - 1];
        let along_e: f64 = zs[0].iter().zip(&e).map(|(a, b)| a * b).sum();
        let f_k = w * along_e.abs().powi(p as i32);
        let f_kp = w * a1.abs().powi(p as i32);
        let f_kp1 = if d >= 2 {
            w * abs_pow_pm2(a1, p) * zs[0][0] * zs[0][0]
        } else {
            0.0
        };
        let f_kp2 = if k >= 2 {
            w * abs_pow_pm2(a1, p) * a1 * zs[1][d - 1]
        } else {
            0.0
        };
        for (slot, f) in [
            (&mut acc.k_, f_k),
            (&mut acc.kp, f_kp),
            (&mut acc.kp1, f_kp1),
            (&mut acc.kp2, f_kp2),
        ] {
            slot.0 += f;
            slot.1 += f * f;
        }
    });

    let finish = |s: (f64, f64)| -> McEstimate {
        let n = mc_samples as f64;
        let mean = s.0 / n;
        let var = (s.1 / n - mean * mean).max(0.0);
        McEstimate {
            value: mean * vol,
            std_err: (var / n).sqrt() * vol,
        }
    };

    let sigma_k = finish(sums.k_);
    let sigma_kp = finish(sums.kp);
    let sigma_kp1 = if d >= 2 {
        finish(sums.kp1)
    } else {
        // at d = 1 the transverse direction degenerates into the axis itself,
        // so the literal integrand is not usable; the constant is defined by
        // continuation in d of its Gamma-function evaluation, which fixes the
        // exact ratio sigma_kp / sigma_kp1 = p - 1 in every dimension
        McEstimate {
            value: sigma_kp.value / (p as f64 - 1.0),
            std_err: sigma_kp.std_err / (p as f64 - 1.0),
        }
    };
    let sigma_kp2 = if k >= 2 {
        finish(sums.kp2)
    } else {
        McEstimate {
            value: 0.0,
            std_err: 0.0,
        }
    };

    Ok(KernelConstants {
        kernel: kernel.name().to_string(),
        d,
        k,
        p,
        sigma_eta: sigma_eta(kernel, d)?,
        sigma_k,
        sigma_kp,
        sigma_kp1,
        sigma_kp2,
        mc_samples,
        seed,
    })
}

/// Radial bound integrals for the k-fold constants:
///
/// `C = int_{[0,R]^k} prod_s eta(r_s) * prod_{r<j} eta(g(r_j, r_l))
///      * r_1^(p+d-1) * prod_{s>=2} r_s^(d-1) dr`
///
/// with `g = r_j + r_l` for the lower bound (smallest possible kernel value
/// at those radii) and `g = |r_j - r_l|` for the upper bound. For `k = 1`
/// there are no cross terms and both integrals coincide, making the Gamma
/// evaluation exact rather than a sandwich.
pub fn c_bounds(kernel: Kernel, d: usize, k: usize, p: u32) -> Result<(f64, f64)> {
    let r = kernel
        .support_radius()
        .ok_or_else(|| Error::invalid("bound integrals need a compactly supported kernel"))?;
    if d == 0 || k == 0 || k > 3 {
        return Err(Error::invalid("need d >= 1 and 1 <= k <= 3"));
    }
    if p < 2 {
        return Err(Error::invalid("need p >= 2"));
    }
    let weight = |radii: &[f64], lower: bool| -> f64 {
        let mut w = 1.0;
        for (s, &rs) in radii.iter().enumerate() {
            w *= kernel.eval(rs);
            if s >= 1 {
                w *= rs.powi(d as i32 - 1);
            } else {
                w *= rs.powi(p as i32 + d as i32 - 1);
            }
        }
        for j in 1..radii.len() {
            for l in 0..j {
                let arg = if lower {
                    radii[j] + radii[l]
                } else {
                    (radii[j] - radii[l]).abs()
                };
                w *= kernel.eval(arg);
            }
        }
        w
    };
    let integrate = |lower: bool| -> f64 {
        match k {
            1 => simpson(|r1| weight(&[r1], lower), 0.0, r, 4096),
            2 => simpson(
                |r1| simpson(|r2| weight(&[r1, r2], lower), 0.0, r, 512),
                0.0,
                r,
                512,
            ),
            3 => simpson(
                |r1| {
                    simpson(
                        |r2| simpson(|r3| weight(&[r1, r2, r3], lower), 0.0, r, 128),
                        0.0,
                        r,
                        128,
                    )
                },
                0.0,
                r,
                128,
            ),
            _ => unreachable!(),
        }
    };
    Ok((integrate(true), integrate(false)))
}

/// Angular Gamma factor multiplying the radial integral in `sigma_kp`.
fn gamma_factor_kp(d: usize, p: u32) -> f64 {
    2.0 * gamma_half(p + 1) * gamma_half(1).powi(d as i32 - 1) / gamma_half(p + d as u32)
}

/// Angular Gamma factor multiplying the radial integral in `sigma_kp1`. The
/// `d = 1` value is the continuation of the same expression.
fn gamma_factor_kp1(d: usize, p: u32) -> f64 {
    2.0 * gamma_half(p - 1) * gamma_half(3) * gamma_half(1).powi(d as i32 - 2)
        / gamma_half(p + d as u32)
}

/// Closed-form sandwich `[lo, hi]` for `sigma_kp`; exact (lo == hi up to
/// quadrature error) when `k = 1`. After bounding the cross factors by radii
/// the angular integrals factor out: block 1 contributes the Gamma factor and
/// every further block a full sphere area.
pub fn sigma_kp_bounds(kernel: Kernel, d: usize, k: usize, p: u32) -> Result<(f64, f64)> {
    let (c_lb, c_ub) = c_bounds(kernel, d, k, p)?;
    let g = gamma_factor_kp(d, p) * sphere_area(d).powi(k as i32 - 1);
    Ok((g * c_lb, g * c_ub))
}

/// Closed-form sandwich `[lo, hi]` for `sigma_kp1`.
pub fn sigma_kp1_bounds(kernel: Kernel, d: usize, k: usize, p: u32) -> Result<(f64, f64)> {
    let (c_lb, c_ub) = c_bounds(kernel, d, k, p)?;
    let g = gamma_factor_kp1(d, p) * sphere_area(d).powi(k as i32 - 1);
    Ok((g * c_lb, g * c_ub))
}

/// Sandwich for the ratio `sigma_kp / sigma_kp1`. The Gamma factors cancel to
/// exactly `p - 1`, so the interval is `[(p-1) C_lb/C_ub, (p-1) C_ub/C_lb]`
/// and collapses to the point `p - 1` when `k = 1`.
pub fn ratio_bounds(kernel: Kernel, d: usize, k: usize, p: u32) -> Result<(f64, f64)> {
    let (c_lb, c_ub) = c_bounds(kernel, d, k, p)?;
    let pm1 = p as f64 - 1.0;
    Ok((pm1 * c_lb / c_ub, pm1 * c_ub / c_lb))
}
