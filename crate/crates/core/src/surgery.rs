//! Competitor functions built from the eigenfunctions of a near-ball raster:
//! the shell scan choosing a radius `B_t̄`, the truncated set `Ω̂` with hat
//! functions `û_j` on the collar `Q(t̄, δ)`, the radial cutoff `ũ`, and the
//! ratio competitors `ṽ_j = (v_j / v_1) u_1` on sets inside a ball.
//!
//! Radii are offsets from the unit-volume ball: `B_t` has radius `r_N + t`.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::ball_oracle::{ball_spectrum, eigenfunction_ratio};
use crate::eigensolver::{assemble, SparseOperator, SpectrumResult};
use crate::geometry::{rasterize_with, unit_ball_radius, ImplicitDomain, RasterDomain, RasterOptions};
use crate::{Error, Result};

/// Radii sampled per shell.
pub const SHELL_SAMPLES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryConfig {
    pub alpha: f64,
    /// Shells scanned are `(iε^α, (i+1)ε^α)` for `i < n`.
    pub n: usize,
    /// Collar thickness; `ε^α` when absent.
    pub delta: Option<f64>,
}

impl SurgeryConfig {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        let cap = match dim {
            2 => 0.5,
            3 => 1.0 / 3.0,
            d => return Err(Error::Dimension(d)),
        };
        if !(alpha > 0.0 && alpha < cap) {
            return Err(Error::ParameterOutOfRange {
                what: "alpha".into(),
                value: alpha,
                range: format!("(0, {cap:.4})"),
            });
        }
        Ok(Self {
            alpha,
            n: shell_count(dim, alpha),
            delta: None,
        })
    }

    /// `α = 0.45` in 2D and `0.30` in 3D.
    pub fn default_for(dim: usize) -> Result<Self> {
        Self::new(dim, if dim == 2 { 0.45 } else { 0.30 })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn shell_width(&self, eps: f64) -> f64 {
        eps.powf(self.alpha)
    }

    pub fn delta(&self, eps: f64) -> f64 {
        self.delta.unwrap_or_else(|| self.shell_width(eps))
    }
}

/// Smallest `n` with `γ_{n-1} ≥ α` for the bootstrap sequence
/// `γ_i = i(1 - 2α)` in 2D and `γ_i = (2^i - 1) 2^{1-i} (1/2 - α)` in 3D.
pub fn shell_count(dim: usize, alpha: f64) -> usize {
    let gamma = |i: usize| {
        if dim == 2 {
            i as f64 * (1.0 - 2.0 * alpha)
        } else {
            (2f64.powi(i as i32) - 1.0) / 2f64.powi(i as i32 - 1) * (0.5 - alpha)
        }
    };
    let mut n = 1;
    while gamma(n - 1) < alpha - 1e-12 {
        n += 1;
        if n > 10_000 {
            break;
        }
    }
    n
}

/// Surface integrals over `S_t = Ω ∩ ∂B_t` at one radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSample {
    pub t: f64,
    /// `∫_{S_t} |Du_j|²` per function.
    pub energy: Vec<f64>,
    /// `H^{N-1}(S_t)`.
    pub measure: f64,
    /// `∫_{S_t} u_j²` per function.
    pub mass: Vec<f64>,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellScanResult {
    pub shell_index: usize,
    pub eps: f64,
    pub t_bar: f64,
    /// Best radius among those where `S_t` is nonempty. `t_bar` itself
    /// usually lands outside `Ω`, where every shell integral vanishes.
    pub t_bar_active: Option<f64>,
    pub samples: Vec<ShellSample>,
    /// `∫_{Ω∖B_t̄} |Du_j|²`.
    pub exterior_energy: Vec<f64>,
    /// `∫_{Ω∖B_{iε^α}} |Du_j|²`.
    pub exterior_energy_inner: Vec<f64>,
    /// Discrete Dirichlet energy of `u_j` on the whole raster.
    pub total_energy: Vec<f64>,
    /// `ln(exterior_energy_inner) / ln ε`, the measured `γ`.
    pub gamma_eff: Vec<f64>,
    /// `ln(∫_{S_t̄} u_j²) / ln ε`, the measured `θ`.
    pub theta_eff: Vec<f64>,
}

/// A modified set and the competitor functions living on it.
#[derive(Clone, Debug)]
pub struct SurgeryOutput {
    pub raster: RasterDomain,
    pub functions: Vec<Vec<f64>>,
    pub rayleigh: Vec<f64>,
    pub gram_l2: Vec<Vec<f64>>,
    pub gram_energy: Vec<Vec<f64>>,
    /// Eigenvalues of the energy Gram relative to the L² Gram.
    pub ritz: Vec<f64>,
    /// Smallest eigenvalue of the L² Gram.
    pub sigma_min: f64,
}

// Multilinear interpolation of a node field; exterior nodes carry zero.
fn interpolate(raster: &RasterDomain, values: &[f64], x: &[f64]) -> f64 {
    let dim = raster.dim();
    let h = raster.spacing();
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for a in 0..dim {
        let s = x[a] / h;
        base[a] = s.floor() as i64;
        frac[a] = s - base[a] as f64;
    }
    let mut total = 0.0;
    for corner in 0..(1usize << dim) {
        let mut g = base;
        let mut w = 1.0;
        for a in 0..dim {
            if corner >> a & 1 == 1 {
                g[a] += 1;
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        if w != 0.0 {
            if let Some(n) = raster.lookup(g) {
                total += w * values[n];
            }
        }
    }
    total
}

// Central-difference gradient at every node, zero beyond the mask.
fn node_gradient(raster: &RasterDomain, u: &[f64]) -> Vec<Vec<f64>> {
    let h = raster.spacing();
    (0..raster.dim())
        .map(|axis| {
            (0..raster.len())
                .map(|a| {
                    let f = raster.neighbor(a, axis, true).map_or(0.0, |b| u[b]);
                    let bk = raster.neighbor(a, axis, false).map_or(0.0, |b| u[b]);
                    (f - bk) / (2.0 * h)
                })
                .collect()
        })
        .collect()
}

// Quadrature points and weights on the sphere of radius rho.
fn sphere_points(dim: usize, rho: f64, h: f64) -> Vec<([f64; 3], f64)> {
    if dim == 2 {
        let n = ((2.0 * std::f64::consts::PI * rho / (0.5 * h)).ceil() as usize).max(512);
        let w = 2.0 * std::f64::consts::PI * rho / n as f64;
        (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
                ([rho * a.cos(), rho * a.sin(), 0.0], w)
            })
            .collect()
    } else {
        let area = 4.0 * std::f64::consts::PI * rho * rho;
        let n = ((area / (0.25 * h * h)).ceil() as usize).clamp(1024, 20_000);
        let w = area / n as f64;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let s = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                ([rho * s * a.cos(), rho * s * a.sin(), rho * z], w)
            })
            .collect()
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// Values divided by their median, or by the smallest positive value when
// the median vanishes.
fn normalized(values: &[f64]) -> Vec<f64> {
    let m = median(values);
    let scale = if m > 0.0 {
        m
    } else {
        values.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min)
    };
    if scale.is_finite() && scale > 0.0 {
        values.iter().map(|v| v / scale).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Per-link energy contributions `h^N · (difference / h)²` located at the
/// link midpoint; boundary links sit halfway to the boundary crossing.
fn energy_beyond(raster: &RasterDomain, u: &[f64], radii: &[f64]) -> (Vec<f64>, f64) {
    let h = raster.spacing();
    let cell = h.powi(raster.dim() as i32);
    let mut beyond = vec![0.0; radii.len()];
    let mut total = 0.0;
    let mut add = |pos: [f64; 3], e: f64| {
        let r = (pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2]).sqrt();
        total += e;
        for (acc, &radius) in beyond.iter_mut().zip(radii) {
            if r > radius {
                *acc += e;
            }
        }
    };
    for a in 0..raster.len() {
        let x = raster.coords(a);
        for axis in 0..raster.dim() {
            if let Some(b) = raster.neighbor(a, axis, true) {
                let mut mid = x;
                mid[axis] += 0.5 * h;
                add(mid, cell * ((u[a] - u[b]) / h).powi(2));
            }
        }
    }
    for link in raster.boundary_links() {
        let mut mid = raster.coords(link.node);
        let sign = if link.forward { 1.0 } else { -1.0 };
        mid[link.axis] += sign * 0.5 * link.fraction * h;
        add(mid, cell * u[link.node].powi(2) / (link.fraction * h * h));
    }
    (beyond, total)
}

/// Scans `t ∈ (iε^α, (i+1)ε^α)` and selects the radius where the shell
/// integrals of every eigenfunction are simultaneously small.
pub fn shell_scan(
    raster: &RasterDomain,
    spectrum: &SpectrumResult,
    cfg: &SurgeryConfig,
    eps: f64,
    shell_index: usize,
) -> Result<ShellScanResult> {
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("shell scan needs ε > 0, got {eps}")));
    }
    let dim = raster.dim();
    let rn = unit_ball_radius(dim);
    let width = cfg.shell_width(eps);
    let inner = rn + shell_index as f64 * width;
    if inner > raster.extent_radius() {
        return Err(Error::EmptyShell { radius: inner });
    }
    let k = spectrum.len();
    let grads: Vec<Vec<Vec<f64>>> = spectrum.eigenvectors.iter().map(|u| node_gradient(raster, u)).collect();
    let h = raster.spacing();

    let mut samples: Vec<ShellSample> = (0..SHELL_SAMPLES)
        .map(|q| {
            let t = (shell_index as f64 + (q as f64 + 0.5) / SHELL_SAMPLES as f64) * width;
            let mut energy = vec![0.0; k];
            let mut mass = vec![0.0; k];
            let mut measure = 0.0;
            for (p, w) in sphere_points(dim, rn + t, h) {
                if !raster.contains_point(&p[..dim]) {
                    continue;
                }
                measure += w;
                for j in 0..k {
                    let u = interpolate(raster, &spectrum.eigenvectors[j], &p);
                    let g2: f64 = grads[j].iter().map(|g| interpolate(raster, g, &p).powi(2)).sum();
                    energy[j] += w * g2;
                    mass[j] += w * u * u;
                }
            }
            ShellSample {
                t,
                energy,
                measure,
                mass,
                score: 0.0,
            }
        })
        .collect();

    let measures = normalized(&samples.iter().map(|s| s.measure).collect::<Vec<_>>());
    let mut scores = measures.clone();
    for j in 0..k {
        let e = normalized(&samples.iter().map(|s| s.energy[j]).collect::<Vec<_>>());
        let m = normalized(&samples.iter().map(|s| s.mass[j]).collect::<Vec<_>>());
        for q in 0..SHELL_SAMPLES {
            scores[q] = scores[q].max(e[q]).max(m[q]);
        }
    }
    let mut best = 0;
    for q in 0..SHELL_SAMPLES {
        samples[q].score = scores[q];
        if scores[q] < scores[best] {
            best = q;
        }
    }
    let t_bar = samples[best].t;
    let t_bar_active = samples
        .iter()
        .filter(|x| x.measure > 0.0)
        .min_by(|a, b| a.score.total_cmp(&b.score))
        .map(|x| x.t);

    let mut exterior_energy = Vec::with_capacity(k);
    let mut exterior_energy_inner = Vec::with_capacity(k);
    let mut total_energy = Vec::with_capacity(k);
    for u in &spectrum.eigenvectors {
        let (beyond, total) = energy_beyond(raster, u, &[rn + t_bar, inner]);
        exterior_energy.push(beyond[0]);
        exterior_energy_inner.push(beyond[1]);
        total_energy.push(total);
    }
    let ln_eps = eps.ln();
    let gamma_eff = exterior_energy_inner.iter().map(|e| e.ln() / ln_eps).collect();
    let theta_eff = samples[best].mass.iter().map(|m| m.ln() / ln_eps).collect();
    Ok(ShellScanResult {
        shell_index,
        eps,
        t_bar,
        t_bar_active,
        samples,
        exterior_energy,
        exterior_energy_inner,
        total_energy,
        gamma_eff,
        theta_eff,
    })
}

// Gram matrices, Rayleigh quotients and Ritz values of a function family.
fn finish(raster: RasterDomain, op: &SparseOperator, functions: Vec<Vec<f64>>) -> Result<SurgeryOutput> {
    let k = functions.len();
    let mut gram_l2 = vec![vec![0.0; k]; k];
    let mut gram_energy = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let m = op.mass(&functions[i], &functions[j]);
            let e = op.energy(&functions[i], &functions[j]);
            gram_l2[i][j] = m;
            gram_l2[j][i] = m;
            gram_energy[i][j] = e;
            gram_energy[j][i] = e;
        }
    }
    let rayleigh = (0..k)
        .map(|j| {
            if gram_l2[j][j] > 0.0 {
                Ok(gram_energy[j][j] / gram_l2[j][j])
            } else {
                Err(Error::ZeroVector)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (ritz, sigma_min) = generalized_eigenvalues(&gram_energy, &gram_l2)?;
    Ok(SurgeryOutput {
        raster,
        functions,
        rayleigh,
        gram_l2,
        gram_energy,
        ritz,
        sigma_min,
    })
}

fn sym_eigen(a: &[Vec<f64>]) -> Result<(Vec<f64>, Mat<f64>)> {
    let k = a.len();
    let m = Mat::<f64>::from_fn(k, k, |i, j| a[i][j]);
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Invalid(format!("Gram eigensolver: {e:?}")))?;
    let s = eig.S().column_vector();
    Ok(((0..k).map(|i| s[i]).collect(), eig.U().to_owned()))
}

// Eigenvalues of G^{-1/2} K G^{-1/2}, and the smallest eigenvalue of G.
fn generalized_eigenvalues(k_mat: &[Vec<f64>], g: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let n = g.len();
    let (s, v) = sym_eigen(g)?;
    let sigma_min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if !(sigma_min > 0.0) {
        return Ok((vec![f64::NAN; n], sigma_min));
    }
    let w = Mat::<f64>::from_fn(n, n, |i, j| (0..n).map(|l| v[(i, l)] * v[(j, l)] / s[l].sqrt()).sum());
    let mut reduced = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    acc += w[(i, a)] * k_mat[a][b] * w[(b, j)];
                }
            }
            reduced[i][j] = acc;
        }
    }
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (reduced[i][j] + reduced[j][i]);
            reduced[i][j] = m;
            reduced[j][i] = m;
        }
    }
    Ok((sym_eigen(&reduced)?.0, sigma_min))
}

fn options_like(raster: &RasterDomain) -> RasterOptions {
    RasterOptions {
        boundary: raster.boundary_model(),
        ..RasterOptions::default()
    }
}

fn source(raster: &RasterDomain) -> Result<&ImplicitDomain> {
    raster
        .source()
        .ok_or_else(|| Error::Invalid("surgery needs a raster built from an implicit domain".into()))
}

/// `Ω̂ = (Ω ∩ B_t̄) ∪ Q(t̄, δ)` with `û_j = u_j` inside `B_t̄` and the trace
/// `u_j(t̄θ)` decaying linearly to zero across the collar.
pub fn hat_extension(raster: &RasterDomain, spectrum: &SpectrumResult, t_bar: f64, delta: f64) -> Result<SurgeryOutput> {
    if !(t_bar > 0.0 && delta > 0.0) {
        return Err(Error::Invalid(format!("hat extension needs t̄, δ > 0, got {t_bar}, {delta}")));
    }
    let extent = raster.extent_radius();
    if t_bar + delta > extent {
        return Err(Error::GridExtent {
            radius: t_bar + delta,
            extent,
        });
    }
    let dim = raster.dim();
    let omega = source(raster)?.clone();
    let r_bar = unit_ball_radius(dim) + t_bar;
    let outer = r_bar + delta;
    let label = format!("hat({})", omega.label());
    let hat = {
        let omega = omega.clone();
        let (rb2, out2) = (r_bar * r_bar, outer * outer);
        let factor = outer / r_bar;
        let bounds = omega
            .bounds()
            .iter()
            .map(|&(a, b)| {
                let lo = if a < 0.0 { (a * factor).max(-outer) } else { -outer };
                let hi = if b > 0.0 { (b * factor).min(outer) } else { outer };
                (lo - 1e-12, hi + 1e-12)
            })
            .collect();
        ImplicitDomain::new(dim, bounds, None, move |x: &[f64]| {
            let q: f64 = x.iter().map(|v| v * v).sum();
            if q < rb2 {
                omega.contains(x)
            } else if q < out2 {
                let s = r_bar / q.sqrt();
                let mut y = [0.0; 3];
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi = xi * s;
                }
                omega.contains(&y[..x.len()])
            } else {
                false
            }
        })?
        .with_label(label)
    };
    let hat_raster = rasterize_with(&hat, raster.spacing(), &options_like(raster))?;
    let h = raster.spacing();
    let functions = spectrum
        .eigenvectors
        .iter()
        .map(|u| {
            (0..hat_raster.len())
                .map(|a| {
                    let x = hat_raster.coords(a);
                    let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if rho < r_bar && omega.contains(&x[..dim]) {
                        return raster.lookup(hat_raster.node(a)).map_or(0.0, |n| u[n]);
                    }
                    let ramp = (1.0 - (rho - r_bar) / delta).clamp(0.0, 1.0);
                    ramp * radial_trace(raster, u, &x, r_bar, h)
                })
                .collect()
        })
        .collect();
    let op = assemble(&hat_raster);
    finish(hat_raster, &op, functions)
}

// u(R x/|x|), read from the first interior node met stepping inward by h/4.
fn radial_trace(raster: &RasterDomain, u: &[f64], x: &[f64; 3], radius: f64, h: f64) -> f64 {
    let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rho == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    while s <= 4.0 * h {
        let scale = (radius - s) / rho;
        let p = [x[0] * scale, x[1] * scale, x[2] * scale];
        if let Some(n) = raster.lookup(raster.nearest_lattice(&p)) {
            return u[n];
        }
        s += 0.25 * h;
    }
    0.0
}

/// Piecewise-linear profile: 1 up to `inner`, 0 from `inner + width` on.
pub fn cutoff_profile(r: f64, inner: f64, width: f64) -> f64 {
    (1.0 - (r - inner) / width).clamp(0.0, 1.0)
}

/// `Ω̃ = Ω ∩ B_{(n+1)ε^α}` and `ũ = u_1 ρ(|x|)` with the ramp on
/// `(nε^α, (n+1)ε^α)`.
pub fn radial_cutoff(raster: &RasterDomain, u1: &[f64], cfg: &SurgeryConfig, eps: f64) -> Result<SurgeryOutput> {
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("radial cutoff needs ε > 0, got {eps}")));
    }
    let dim = raster.dim();
    let width = cfg.shell_width(eps);
    let inner = unit_ball_radius(dim) + cfg.n as f64 * width;
    let outer = inner + width;
    let cut = source(raster)?.intersect_ball(outer);
    let cut_raster = rasterize_with(&cut, raster.spacing(), &options_like(raster))?;
    let function = (0..cut_raster.len())
        .map(|a| {
            let x = cut_raster.coords(a);
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            raster.lookup(cut_raster.node(a)).map_or(0.0, |n| u1[n]) * cutoff_profile(r, inner, width)
        })
        .collect();
    let op = assemble(&cut_raster);
    finish(cut_raster, &op, vec![function])
}

/// `ṽ_j = (v_j / v_1) u_1` for the first `k` eigenfunctions of the ball of
/// radius `reference_radius` (the unit-volume ball when absent) containing
/// the raster.
pub fn ratio_competitors(
    raster: &RasterDomain,
    u1: &[f64],
    k: usize,
    reference_radius: Option<f64>,
) -> Result<SurgeryOutput> {
    let dim = raster.dim();
    let rn = unit_ball_radius(dim);
    let radius = reference_radius.unwrap_or(rn);
    let mut scaled = Vec::with_capacity(raster.len());
    for a in 0..raster.len() {
        let x = raster.coords(a);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > radius * (1.0 + 1e-12) {
            return Err(Error::OutsideBall {
                radius: r,
                ball_radius: radius,
            });
        }
        let s = rn / radius;
        scaled.push([x[0] * s, x[1] * s, x[2] * s]);
    }
    let modes = ball_spectrum(dim, k)?.modes;
    let functions = modes
        .iter()
        .map(|mode| scaled.iter().zip(u1).map(|(x, u)| eigenfunction_ratio(mode, &x[..dim]) * u).collect())
        .collect();
    let op = assemble(raster);
    let out = finish(raster.clone(), &op, functions)?;
    if out.sigma_min < 0.5 {
        return Err(Error::DegenerateSpan {
            sigma_min: out.sigma_min,
        });
    }
    Ok(out)
}
