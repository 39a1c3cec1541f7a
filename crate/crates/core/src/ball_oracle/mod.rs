//! Closed-form spectra: the unit-volume disk and ball (Bessel zeros), boxes,
//! and the ball eigenfunctions together with their ratios `v_j / v_1`.

mod bessel;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use bessel::{bessel_j, bessel_j_scaled, bessel_zero, mcmahon, MAX_INDEX, MAX_ORDER};

use crate::geometry::unit_ball_radius;
use crate::{Error, Result};

/// Largest `k` accepted by [`ball_spectrum`].
pub const MAX_BALL_MODES: usize = 200;

// Below this distance to the sphere (relative to the radius) the ratio
// v_j/v_1 is evaluated by its boundary limit.
const BOUNDARY_LAYER: f64 = 1e-6;

/// One eigenfunction of the Dirichlet Laplacian on the unit-volume ball.
///
/// `component` selects the angular factor: in 2D `+l` is `cos(lθ)` and `-l`
/// is `sin(lθ)`; in 3D it is the order `q ∈ -l..=l` of a real spherical
/// harmonic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallMode {
    pub dim: usize,
    pub l: usize,
    pub m: usize,
    pub component: i32,
    pub eigenvalue: f64,
    pub multiplicity: usize,
    zero: f64,
}

impl BallMode {
    pub fn new(dim: usize, l: usize, m: usize, component: i32) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Dimension(dim));
        }
        let valid = match dim {
            2 => (l == 0 && component == 0) || (l > 0 && component.unsigned_abs() as usize == l),
            _ => component.unsigned_abs() as usize <= l,
        };
        if !valid {
            return Err(Error::Invalid(format!("component {component} for l = {l}")));
        }
        let nu = order(dim, l);
        let zero = bessel_zero(nu, m)?;
        let r = unit_ball_radius(dim);
        Ok(Self {
            dim,
            l,
            m,
            component,
            eigenvalue: (zero / r).powi(2),
            multiplicity: multiplicity(dim, l),
            zero,
        })
    }

    /// The positive radial ground state.
    pub fn ground(dim: usize) -> Result<Self> {
        Self::new(dim, 0, 1, 0)
    }

    /// Bessel order `ν = l + (N-2)/2`.
    pub fn order(&self) -> f64 {
        order(self.dim, self.l)
    }

    /// The zero `j_{ν,m}`.
    pub fn bessel_zero(&self) -> f64 {
        self.zero
    }

    fn radial_power(&self) -> f64 {
        0.5 * (self.dim as f64 - 2.0)
    }

    fn wavenumber(&self) -> f64 {
        self.zero / unit_ball_radius(self.dim)
    }

    // c with ∫_B (c·f(r)·Y)^2 = 1, where f(r) = J_ν(κr)/(κr)^p:
    // ∫_0^R f² r^{N-1} dr = κ^{-2p} R² J_{ν+1}(j)² / 2.
    fn normalization(&self) -> f64 {
        let r = unit_ball_radius(self.dim);
        let p = self.radial_power();
        let jp = bessel_j(self.order() + 1.0, self.zero);
        let radial = self.wavenumber().powf(-2.0 * p) * 0.5 * r * r * jp * jp;
        let angular = match (self.dim, self.l) {
            (2, 0) => 2.0 * PI,
            (2, _) => PI,
            _ => 1.0,
        };
        1.0 / (radial * angular).sqrt()
    }

    fn angular(&self, x: &[f64]) -> f64 {
        if self.dim == 2 {
            if self.l == 0 {
                return 1.0;
            }
            let theta = x[1].atan2(x[0]);
            let lt = self.l as f64 * theta;
            if self.component > 0 {
                lt.cos()
            } else {
                lt.sin()
            }
        } else {
            real_spherical_harmonic(self.l, self.component, x)
        }
    }
}

fn order(dim: usize, l: usize) -> f64 {
    l as f64 + 0.5 * (dim as f64 - 2.0)
}

fn multiplicity(dim: usize, l: usize) -> usize {
    match (dim, l) {
        (2, 0) => 1,
        (2, _) => 2,
        _ => 2 * l + 1,
    }
}

fn components(dim: usize, l: usize) -> Vec<i32> {
    let l = l as i32;
    match (dim, l) {
        (2, 0) => vec![0],
        (2, _) => vec![l, -l],
        _ => (-l..=l).collect(),
    }
}

// Orthonormal real spherical harmonic on S²; the point need not be unit.
fn real_spherical_harmonic(l: usize, q: i32, x: &[f64]) -> f64 {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r == 0.0 {
        return if l == 0 { 0.5 / PI.sqrt() } else { 0.0 };
    }
    let m = q.unsigned_abs() as usize;
    let ct = (x[2] / r).clamp(-1.0, 1.0);
    let st = (1.0 - ct * ct).max(0.0).sqrt();
    // Fully normalized associated Legendre functions by the standard
    // three-term recurrence in l at fixed m.
    let mut pmm = 0.5 / PI.sqrt();
    for i in 1..=m {
        pmm *= ((2 * i + 1) as f64 / (2 * i) as f64).sqrt() * st;
    }
    let p = if l == m {
        pmm
    } else {
        let mut p_prev = pmm;
        let mut p_cur = ((2 * m + 3) as f64).sqrt() * ct * pmm;
        for ll in (m + 2)..=l {
            let a = |n: usize| (((4 * n * n - 1) as f64) / ((n * n - m * m) as f64)).sqrt();
            let next = a(ll) * (ct * p_cur - p_prev / a(ll - 1));
            p_prev = p_cur;
            p_cur = next;
        }
        p_cur
    };
    if q == 0 {
        p
    } else {
        let phi = x[1].atan2(x[0]);
        let mp = m as f64 * phi;
        std::f64::consts::SQRT_2 * p * if q > 0 { mp.cos() } else { mp.sin() }
    }
}

/// Sorted unit-volume ball eigenvalues, repeated with multiplicity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpectrum {
    pub dim: usize,
    pub modes: Vec<BallMode>,
}

impl BallSpectrum {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// The first `k` eigenvalues of the unit-volume ball in dimension `dim`.
pub fn ball_spectrum(dim: usize, k: usize) -> Result<BallSpectrum> {
    if dim != 2 && dim != 3 {
        return Err(Error::Dimension(dim));
    }
    if k > MAX_BALL_MODES {
        return Err(Error::ParameterOutOfRange {
            what: "ball mode count".into(),
            value: k as f64,
            range: format!("<= {MAX_BALL_MODES}"),
        });
    }
    let r = unit_ball_radius(dim);
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for l in 0..=MAX_ORDER as usize {
        let first = (bessel_zero(order(dim, l), 1)? / r).powi(2);
        if kth_with_multiplicity(&candidates, dim, k).is_some_and(|cut| first > cut) {
            break;
        }
        for m in 1..=MAX_INDEX {
            candidates.push(((bessel_zero(order(dim, l), m)? / r).powi(2), l, m));
        }
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut modes = Vec::with_capacity(k);
    'outer: for &(_, l, m) in &candidates {
        for c in components(dim, l) {
            if modes.len() == k {
                break 'outer;
            }
            modes.push(BallMode::new(dim, l, m, c)?);
        }
    }
    Ok(BallSpectrum { dim, modes })
}

fn kth_with_multiplicity(candidates: &[(f64, usize, usize)], dim: usize, k: usize) -> Option<f64> {
    let mut sorted: Vec<_> = candidates.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut count = 0;
    for (lambda, l, _) in sorted {
        count += multiplicity(dim, l);
        if count >= k {
            return Some(lambda);
        }
    }
    None
}

/// First `k` Dirichlet eigenvalues of the box with the given side lengths.
pub fn box_spectrum(sides: &[f64], k: usize) -> Vec<f64> {
    assert!(sides.iter().all(|s| *s > 0.0), "box sides must be positive");
    let mut values = Vec::new();
    let n = k.max(1) as u64;
    let mut idx = vec![1u64; sides.len()];
    loop {
        values.push(
            PI * PI
                * idx
                    .iter()
                    .zip(sides)
                    .map(|(&i, s)| (i * i) as f64 / (s * s))
                    .sum::<f64>(),
        );
        let mut axis = 0;
        while axis < idx.len() {
            idx[axis] += 1;
            if idx[axis] <= n {
                break;
            }
            idx[axis] = 1;
            axis += 1;
        }
        if axis == idx.len() {
            break;
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.truncate(k);
    values
}

/// First `k` Dirichlet eigenvalues of the `a × b` rectangle.
pub fn rectangle_spectrum(a: f64, b: f64, k: usize) -> Vec<f64> {
    box_spectrum(&[a, b], k)
}

/// L²-normalized eigenfunction of the unit-volume ball at `x`.
pub fn ball_eigenfunction(mode: &BallMode, x: &[f64]) -> Result<f64> {
    let rn = unit_ball_radius(mode.dim);
    let r = x[..mode.dim].iter().map(|v| v * v).sum::<f64>().sqrt();
    if r > rn * (1.0 + 1e-12) {
        return Err(Error::OutsideBall {
            radius: r,
            ball_radius: rn,
        });
    }
    let kr = (mode.wavenumber() * r).min(mode.zero);
    let radial = bessel_j_scaled(mode.order(), kr, mode.radial_power());
    Ok(mode.normalization() * radial * mode.angular(&x[..mode.dim]))
}

/// `v_j(x) / v_1(x)` on the closed unit-volume ball, continued to the sphere
/// by the ratio of normal derivatives. Points outside are projected radially.
pub fn eigenfunction_ratio(mode: &BallMode, x: &[f64]) -> f64 {
    let dim = mode.dim;
    let rn = unit_ball_radius(dim);
    let r = x[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
    if mode.l == 0 && mode.m == 1 {
        return 1.0;
    }
    let ground = BallMode::ground(dim).expect("ground mode");
    if 1.0 - r / rn < BOUNDARY_LAYER {
        let p = mode.radial_power();
        let slope = |md: &BallMode| {
            md.normalization() * md.wavenumber() * bessel_j(md.order() + 1.0, md.zero) * md.zero.powf(-p)
        };
        return slope(mode) * mode.angular(&x[..dim]) / (slope(&ground) * ground.angular(&x[..dim]));
    }
    let vj = ball_eigenfunction(mode, x).expect("inside the ball");
    let v1 = ball_eigenfunction(&ground, x).expect("inside the ball");
    vj / v1
}
