//! Implicit domains, parametric near-ball families and their rasterization
//! onto the uniform lattice `h·Z^N`.
//!
//! Every raster is aligned with the global lattice, so two domains rasterized
//! at the same spacing share nodes, and scaling a domain together with the
//! spacing by a power of two reproduces the mask bit for bit.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::quadrature::{gauss_legendre, legendre, unit_ball_volume};
use crate::{Error, Result};

/// Membership test of an open set.
pub type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Default maximal number of lattice nodes in a raster bounding box.
pub const DEFAULT_NODE_BUDGET: usize = 1 << 25;

/// Volume `ω_N` of the unit-radius ball.
pub fn omega(dim: usize) -> f64 {
    unit_ball_volume(dim)
}

/// Radius `ω_N^{-1/N}` of the ball of unit volume.
pub fn unit_ball_radius(dim: usize) -> f64 {
    omega(dim).powf(-1.0 / dim as f64)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::Dimension(dim))
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// An open subset of `R^N` given by a membership predicate and a bounding box.
#[derive(Clone)]
pub struct ImplicitDomain {
    dim: usize,
    predicate: Predicate,
    bounds: Vec<(f64, f64)>,
    volume: Option<f64>,
    label: String,
}

impl fmt::Debug for ImplicitDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplicitDomain")
            .field("dim", &self.dim)
            .field("bounds", &self.bounds)
            .field("volume", &self.volume)
            .field("label", &self.label)
            .finish()
    }
}

impl ImplicitDomain {
    /// Builds a domain. `bounds` must strictly contain the set where the
    /// predicate holds.
    pub fn new<F>(dim: usize, bounds: Vec<(f64, f64)>, volume: Option<f64>, predicate: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        check_dim(dim)?;
        if bounds.len() != dim || bounds.iter().any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Invalid(format!("bad bounding box {bounds:?}")));
        }
        Ok(Self {
            dim,
            predicate: Arc::new(predicate),
            bounds,
            volume,
            label: String::from("domain"),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Analytic volume, when known.
    pub fn volume(&self) -> Option<f64> {
        self.volume
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        (self.predicate)(x)
    }

    /// The dilation `tΩ`.
    pub fn scaled(&self, t: f64) -> Self {
        let inner = self.predicate.clone();
        let dim = self.dim;
        Self {
            dim,
            predicate: Arc::new(move |x: &[f64]| {
                let mut y = [0.0; 3];
                for i in 0..dim {
                    y[i] = x[i] / t;
                }
                inner(&y[..dim])
            }),
            bounds: self.bounds.iter().map(|&(a, b)| (a * t, b * t)).collect(),
            volume: self.volume.map(|v| v * t.powi(dim as i32)),
            label: self.label.clone(),
        }
    }

    /// The translate `v + Ω`.
    pub fn translated(&self, v: &[f64]) -> Self {
        let inner = self.predicate.clone();
        let dim = self.dim;
        let mut shift = [0.0; 3];
        shift[..dim].copy_from_slice(&v[..dim]);
        Self {
            dim,
            predicate: Arc::new(move |x: &[f64]| {
                let mut y = [0.0; 3];
                for i in 0..dim {
                    y[i] = x[i] - shift[i];
                }
                inner(&y[..dim])
            }),
            bounds: self.bounds.iter().zip(&shift).map(|(&(a, b), s)| (a + s, b + s)).collect(),
            volume: self.volume,
            label: self.label.clone(),
        }
    }

    /// `Ω ∩ B(0, radius)`.
    pub fn intersect_ball(&self, radius: f64) -> Self {
        let inner = self.predicate.clone();
        let r2 = radius * radius;
        Self {
            dim: self.dim,
            predicate: Arc::new(move |x: &[f64]| norm2(x) < r2 && inner(x)),
            bounds: self.bounds.iter().map(|&(a, b)| (a.max(-radius - 1e-12), b.min(radius + 1e-12))).collect(),
            volume: None,
            label: format!("{}∩B({radius:.4})", self.label),
        }
    }

    /// Analytic volume if known, otherwise a cell count on a fine raster.
    pub fn volume_estimate(&self) -> Result<f64> {
        if let Some(v) = self.volume {
            return Ok(v);
        }
        let extent = self.bounds.iter().map(|(a, b)| b - a).fold(0.0, f64::max);
        let cells = if self.dim == 2 { 1024.0 } else { 160.0 };
        let raster = rasterize(self, extent / cells)?;
        Ok(raster.volume())
    }
}

/// The ball `B_γ` centered at the origin with radius `ω_N^{-1/N} + γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentricBall {
    pub dim: usize,
    pub gamma: f64,
}

impl ConcentricBall {
    pub fn new(dim: usize, gamma: f64) -> Result<Self> {
        check_dim(dim)?;
        if unit_ball_radius(dim) + gamma <= 0.0 {
            return Err(Error::ParameterOutOfRange {
                what: "ball offset".into(),
                value: gamma,
                range: format!("> {}", -unit_ball_radius(dim)),
            });
        }
        Ok(Self { dim, gamma })
    }

    pub fn radius(&self) -> f64 {
        unit_ball_radius(self.dim) + self.gamma
    }

    pub fn volume(&self) -> f64 {
        omega(self.dim) * self.radius().powi(self.dim as i32)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let r = self.radius();
        norm2(x) < r * r
    }

    pub fn domain(&self) -> ImplicitDomain {
        ball_domain(self.dim, self.radius())
            .with_label(format!("B_{}", self.gamma))
    }
}

fn ball_domain(dim: usize, radius: f64) -> ImplicitDomain {
    let r2 = radius * radius;
    let pad = radius * 1e-9 + 1e-12;
    ImplicitDomain {
        dim,
        predicate: Arc::new(move |x: &[f64]| norm2(x) < r2),
        bounds: vec![(-radius - pad, radius + pad); dim],
        volume: Some(omega(dim) * radius.powi(dim as i32)),
        label: format!("ball({radius})"),
    }
}

/// Rescales a domain to unit volume by `t = |Ω|^{-1/N}`.
pub fn normalize_to_unit_volume(domain: &ImplicitDomain) -> Result<ImplicitDomain> {
    let volume = domain.volume_estimate()?;
    if !(volume > 0.0) || !volume.is_finite() {
        return Err(Error::DegenerateDomain(format!("volume {volume} of {}", domain.label)));
    }
    let t = volume.powf(-1.0 / domain.dim as f64);
    let mut out = if t == 1.0 { domain.clone() } else { domain.scaled(t) };
    out.volume = Some(1.0);
    Ok(out)
}

/// Parametric domain families driving the sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Ellipse (spheroid in 3D) with semi-axes `r(1+s)` and `r/(1+s)^{1/(N-1)}`.
    Ellipse,
    /// Star-shaped ball with radius `r0(1 + s·cos(mθ))` (zonal `P_m` in 3D).
    FourierPerturbedBall,
    /// Ball minus a concentric ball of radius `s·r`.
    BallWithHole,
    /// Ball minus the cap `{x_1 > r(1-s)}`.
    BallMinusCap,
    /// Rectangle (box in 3D) with sides `√s`, `1/√s` (and 1).
    Rectangle,
    /// Stadium (capsule in 3D) with straight part `2sρ` and end radius `ρ`.
    Stadium,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] = [
        FamilyKind::Ellipse,
        FamilyKind::FourierPerturbedBall,
        FamilyKind::BallWithHole,
        FamilyKind::BallMinusCap,
        FamilyKind::Rectangle,
        FamilyKind::Stadium,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Ellipse => "ellipse",
            FamilyKind::FourierPerturbedBall => "fourier-perturbed-ball",
            FamilyKind::BallWithHole => "ball-with-hole",
            FamilyKind::BallMinusCap => "ball-minus-cap",
            FamilyKind::Rectangle => "rectangle",
            FamilyKind::Stadium => "stadium",
        }
    }

    /// Whether `s = 0` yields the ball.
    pub fn is_near_ball(self) -> bool {
        !matches!(self, FamilyKind::Rectangle)
    }

    /// Closed range of the sweep parameter `s`.
    pub fn parameter_range(self) -> (f64, f64) {
        match self {
            FamilyKind::Ellipse => (0.0, 1.0),
            FamilyKind::FourierPerturbedBall => (0.0, 0.5),
            FamilyKind::BallWithHole => (0.0, 0.9),
            FamilyKind::BallMinusCap => (0.0, 1.0),
            FamilyKind::Rectangle => (0.05, 20.0),
            FamilyKind::Stadium => (0.0, 4.0),
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "ellipse" | "ellipsoid" => FamilyKind::Ellipse,
            "fourier-perturbed-ball" | "fourier" => FamilyKind::FourierPerturbedBall,
            "ball-with-hole" | "hole" => FamilyKind::BallWithHole,
            "ball-minus-cap" | "cap" => FamilyKind::BallMinusCap,
            "rectangle" | "box" => FamilyKind::Rectangle,
            "stadium" | "capsule" => FamilyKind::Stadium,
            other => return Err(Error::Invalid(format!("unknown family kind `{other}`"))),
        })
    }
}

/// A family of domains: kind, dimension, shape parameters and whether the
/// generated domains are rescaled to unit volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub dim: usize,
    /// Kind-specific shape parameters; the Fourier family reads its mode
    /// number from `shape[0]` (default 3).
    #[serde(default)]
    pub shape: Vec<f64>,
    pub normalize: bool,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            shape: Vec::new(),
            normalize: true,
        }
    }

    pub fn with_shape(mut self, shape: Vec<f64>) -> Self {
        self.shape = shape;
        self
    }

    pub fn unnormalized(mut self) -> Self {
        self.normalize = false;
        self
    }
}

/// Generates the member of `spec` at parameter `s`.
pub fn make_family(spec: &FamilySpec, s: f64) -> Result<ImplicitDomain> {
    check_dim(spec.dim)?;
    let (lo, hi) = spec.kind.parameter_range();
    if !(s >= lo && s <= hi) {
        return Err(Error::ParameterOutOfRange {
            what: spec.kind.name().into(),
            value: s,
            range: format!("[{lo}, {hi}]"),
        });
    }
    let dim = spec.dim;
    let r = unit_ball_radius(dim);
    let domain = match spec.kind {
        FamilyKind::Ellipse => {
            let a = r * (1.0 + s);
            let b = r * (1.0 + s).powf(-1.0 / (dim as f64 - 1.0));
            let mut bounds = vec![(-a * (1.0 + 1e-9), a * (1.0 + 1e-9))];
            bounds.extend(std::iter::repeat((-b * (1.0 + 1e-9), b * (1.0 + 1e-9))).take(dim - 1));
            let (ia2, ib2) = (1.0 / (a * a), 1.0 / (b * b));
            ImplicitDomain::new(dim, bounds, Some(1.0), move |x: &[f64]| {
                x[0] * x[0] * ia2 + x[1..].iter().map(|v| v * v).sum::<f64>() * ib2 < 1.0
            })?
        }
        FamilyKind::FourierPerturbedBall => {
            let m = spec.shape.first().copied().unwrap_or(3.0);
            if !(m >= 1.0 && m.fract() == 0.0) {
                return Err(Error::ParameterOutOfRange {
                    what: "Fourier mode".into(),
                    value: m,
                    range: "positive integer".into(),
                });
            }
            let m = m as usize;
            let (r0, volume) = if dim == 2 {
                let area_factor = 1.0 + 0.5 * s * s;
                if spec.normalize {
                    (r / area_factor.sqrt(), 1.0)
                } else {
                    (r, area_factor)
                }
            } else {
                let (nodes, weights) = gauss_legendre(64);
                let integral: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&mu, w)| w * (1.0 + s * legendre(m, mu)).powi(3))
                    .sum();
                let vol_of = |r0: f64| 2.0 * PI / 3.0 * r0.powi(3) * integral;
                if spec.normalize {
                    ((3.0 / (2.0 * PI * integral)).cbrt(), 1.0)
                } else {
                    (r, vol_of(r))
                }
            };
            let reach = r0 * (1.0 + s) * (1.0 + 1e-9);
            ImplicitDomain::new(dim, vec![(-reach, reach); dim], Some(volume), move |x: &[f64]| {
                let rho2 = norm2(x);
                if rho2 == 0.0 {
                    return true;
                }
                let rho = rho2.sqrt();
                let bound = if x.len() == 2 {
                    r0 * (1.0 + s * (m as f64 * x[1].atan2(x[0])).cos())
                } else {
                    r0 * (1.0 + s * legendre(m, x[2] / rho))
                };
                rho < bound
            })?
        }
        FamilyKind::BallWithHole => {
            let t = if spec.normalize {
                (1.0 - s.powi(dim as i32)).powf(-1.0 / dim as f64)
            } else {
                1.0
            };
            let outer = r * t;
            let inner = s * r * t;
            let volume = omega(dim) * (outer.powi(dim as i32) - inner.powi(dim as i32));
            let (o2, i2) = (outer * outer, inner * inner);
            let pad = outer * (1.0 + 1e-9);
            ImplicitDomain::new(dim, vec![(-pad, pad); dim], Some(volume), move |x: &[f64]| {
                let q = norm2(x);
                q < o2 && (s == 0.0 || q > i2)
            })?
        }
        FamilyKind::BallMinusCap => {
            let cap_height = s * r;
            let cap = if dim == 2 {
                let c = r - cap_height;
                r * r * (c / r).clamp(-1.0, 1.0).acos() - c * (r * r - c * c).max(0.0).sqrt()
            } else {
                PI * cap_height * cap_height * (3.0 * r - cap_height) / 3.0
            };
            let base_volume = 1.0 - cap;
            let t = if spec.normalize {
                base_volume.powf(-1.0 / dim as f64)
            } else {
                1.0
            };
            let radius = r * t;
            let cut = (r - cap_height) * t;
            let r2 = radius * radius;
            let pad = radius * (1.0 + 1e-9);
            let volume = base_volume * t.powi(dim as i32);
            ImplicitDomain::new(dim, vec![(-pad, pad); dim], Some(volume), move |x: &[f64]| {
                norm2(x) < r2 && x[0] < cut
            })?
        }
        FamilyKind::Rectangle => {
            let a = s.sqrt();
            let b = 1.0 / a;
            let half = [0.5 * a, 0.5 * b, 0.5];
            let bounds = (0..dim).map(|i| (-half[i] * (1.0 + 1e-9), half[i] * (1.0 + 1e-9))).collect();
            ImplicitDomain::new(dim, bounds, Some(1.0), move |x: &[f64]| {
                x.iter().zip(half.iter()).all(|(v, h)| v.abs() < *h)
            })?
        }
        FamilyKind::Stadium => {
            let unit_shape = if dim == 2 { PI + 4.0 * s } else { 4.0 * PI / 3.0 + 2.0 * PI * s };
            let rho = if spec.normalize {
                unit_shape.powf(-1.0 / dim as f64)
            } else {
                r
            };
            let half_len = s * rho;
            let volume = unit_shape * rho.powi(dim as i32);
            let mut bounds = vec![(-(half_len + rho) * (1.0 + 1e-9), (half_len + rho) * (1.0 + 1e-9))];
            bounds.extend(std::iter::repeat((-rho * (1.0 + 1e-9), rho * (1.0 + 1e-9))).take(dim - 1));
            let rho2 = rho * rho;
            ImplicitDomain::new(dim, bounds, Some(volume), move |x: &[f64]| {
                let dx = x[0] - x[0].clamp(-half_len, half_len);
                dx * dx + x[1..].iter().map(|v| v * v).sum::<f64>() < rho2
            })?
        }
    };
    Ok(domain.with_label(format!("{}(s={s})", spec.kind.name())))
}

/// How the operator treats links from an interior node to an exterior one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryModel {
    /// The exterior neighbor carries the zero value at full spacing `h`.
    Staircase,
    /// The zero value sits at the boundary crossing located on the link.
    Fitted,
}

/// A link from an interior node to an exterior neighbor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryLink {
    pub node: usize,
    pub axis: usize,
    pub forward: bool,
    /// Distance to the boundary crossing in units of `h`, in `(0, 1]`.
    pub fraction: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct RasterOptions {
    pub node_budget: usize,
    pub boundary: BoundaryModel,
}

impl Default for RasterOptions {
    fn default() -> Self {
        Self {
            node_budget: DEFAULT_NODE_BUDGET,
            boundary: BoundaryModel::Fitted,
        }
    }
}

const EXTERIOR: u32 = u32::MAX;
const MIN_FRACTION: f64 = 1e-6;

/// A domain discretized on the lattice `h·Z^N`: the interior nodes, a dense
/// index over them, and the boundary links.
#[derive(Clone, Debug)]
pub struct RasterDomain {
    dim: usize,
    h: f64,
    lo: [i64; 3],
    shape: [usize; 3],
    index: Vec<u32>,
    nodes: Vec<[i64; 3]>,
    boundary: Vec<BoundaryLink>,
    model: BoundaryModel,
    source: Option<ImplicitDomain>,
}

/// Rasterizes with the default options (fitted boundary links).
pub fn rasterize(domain: &ImplicitDomain, h: f64) -> Result<RasterDomain> {
    rasterize_with(domain, h, &RasterOptions::default())
}

pub fn rasterize_with(domain: &ImplicitDomain, h: f64, options: &RasterOptions) -> Result<RasterDomain> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Resolution(format!("spacing {h} must be positive")));
    }
    let dim = domain.dim;
    let mut lo = [0i64; 3];
    let mut shape = [1usize; 3];
    let mut total: f64 = 1.0;
    for (axis, &(a, b)) in domain.bounds.iter().enumerate() {
        let i0 = (a / h).floor() as i64 - 2;
        let i1 = (b / h).ceil() as i64 + 2;
        lo[axis] = i0;
        shape[axis] = (i1 - i0 + 1) as usize;
        total *= shape[axis] as f64;
    }
    if total > options.node_budget as f64 {
        return Err(Error::Resolution(format!(
            "{total} lattice nodes at h = {h} exceed the budget of {}",
            options.node_budget
        )));
    }
    let mut index = vec![EXTERIOR; shape[0] * shape[1] * shape[2]];
    let mut nodes = Vec::new();
    let mut x = [0.0; 3];
    for k in 0..shape[2] {
        for j in 0..shape[1] {
            for i in 0..shape[0] {
                let g = [lo[0] + i as i64, lo[1] + j as i64, lo[2] + k as i64];
                for a in 0..dim {
                    x[a] = g[a] as f64 * h;
                }
                if domain.contains(&x[..dim]) {
                    index[(k * shape[1] + j) * shape[0] + i] = nodes.len() as u32;
                    nodes.push(g);
                }
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::DegenerateDomain(format!("no interior nodes for {} at h = {h}", domain.label)));
    }
    let mut raster = RasterDomain {
        dim,
        h,
        lo,
        shape,
        index,
        nodes,
        boundary: Vec::new(),
        model: options.boundary,
        source: Some(domain.clone()),
    };
    raster.boundary = raster.collect_boundary(options.boundary);
    Ok(raster)
}

impl RasterDomain {
    /// Builds a raster from explicit lattice nodes (staircase boundary).
    pub fn from_nodes(dim: usize, h: f64, nodes: &[[i64; 3]]) -> Result<Self> {
        check_dim(dim)?;
        if nodes.is_empty() {
            return Err(Error::DegenerateDomain("empty node set".into()));
        }
        let mut lo = [0i64; 3];
        let mut shape = [1usize; 3];
        for a in 0..dim {
            let min = nodes.iter().map(|n| n[a]).min().unwrap() - 2;
            let max = nodes.iter().map(|n| n[a]).max().unwrap() + 2;
            lo[a] = min;
            shape[a] = (max - min + 1) as usize;
        }
        let mut sorted: Vec<[i64; 3]> = nodes.iter().map(|n| {
            let mut g = *n;
            for c in g.iter_mut().skip(dim) {
                *c = 0;
            }
            g
        }).collect();
        sorted.sort_by(|a, b| (a[2], a[1], a[0]).cmp(&(b[2], b[1], b[0])));
        sorted.dedup();
        let mut index = vec![EXTERIOR; shape[0] * shape[1] * shape[2]];
        for (n, g) in sorted.iter().enumerate() {
            let flat = ((g[2] - lo[2]) as usize * shape[1] + (g[1] - lo[1]) as usize) * shape[0] + (g[0] - lo[0]) as usize;
            index[flat] = n as u32;
        }
        let mut raster = RasterDomain {
            dim,
            h,
            lo,
            shape,
            index,
            nodes: sorted,
            boundary: Vec::new(),
            model: BoundaryModel::Staircase,
            source: None,
        };
        raster.boundary = raster.collect_boundary(BoundaryModel::Staircase);
        Ok(raster)
    }

    fn collect_boundary(&self, model: BoundaryModel) -> Vec<BoundaryLink> {
        let mut links = Vec::new();
        let mut x = [0.0; 3];
        for a in 0..self.nodes.len() {
            for axis in 0..self.dim {
                for forward in [false, true] {
                    if self.neighbor(a, axis, forward).is_some() {
                        continue;
                    }
                    let fraction = match (&self.source, model) {
                        (Some(domain), BoundaryModel::Fitted) => {
                            let base = self.coords(a);
                            let step = if forward { self.h } else { -self.h };
                            // Invariant: base + lo·step inside, base + hi·step outside.
                            let (mut lo, mut hi) = (0.0f64, 1.0f64);
                            for _ in 0..52 {
                                let mid = 0.5 * (lo + hi);
                                x[..self.dim].copy_from_slice(&base[..self.dim]);
                                x[axis] = base[axis] + mid * step;
                                if domain.contains(&x[..self.dim]) {
                                    lo = mid;
                                } else {
                                    hi = mid;
                                }
                            }
                            // A crossing on the exterior node itself rounds to just below 1.
                            if hi > 1.0 - 1e-12 {
                                1.0
                            } else {
                                hi.max(MIN_FRACTION)
                            }
                        }
                        _ => 1.0,
                    };
                    links.push(BoundaryLink { node: a, axis, forward, fraction });
                }
            }
        }
        links
    }

    /// Same mask with every boundary link at full spacing.
    pub fn with_staircase_boundary(&self) -> Self {
        let mut out = self.clone();
        out.model = BoundaryModel::Staircase;
        for link in &mut out.boundary {
            link.fraction = 1.0;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Number of interior nodes `M`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn boundary_model(&self) -> BoundaryModel {
        self.model
    }

    pub fn boundary_links(&self) -> &[BoundaryLink] {
        &self.boundary
    }

    /// The domain the raster was built from, if any.
    pub fn source(&self) -> Option<&ImplicitDomain> {
        self.source.as_ref()
    }

    /// Lattice index of the first node of the bounding grid.
    pub fn grid_lo(&self) -> [i64; 3] {
        self.lo
    }

    pub fn grid_shape(&self) -> [usize; 3] {
        self.shape
    }

    /// Coordinates of the first node of the bounding grid.
    pub fn origin(&self) -> [f64; 3] {
        [self.lo[0] as f64 * self.h, self.lo[1] as f64 * self.h, self.lo[2] as f64 * self.h]
    }

    /// Lattice index of interior node `a`.
    pub fn node(&self, a: usize) -> [i64; 3] {
        self.nodes[a]
    }

    pub fn nodes(&self) -> &[[i64; 3]] {
        &self.nodes
    }

    /// Coordinates of interior node `a` (unused axes are zero).
    pub fn coords(&self, a: usize) -> [f64; 3] {
        let g = self.nodes[a];
        [g[0] as f64 * self.h, g[1] as f64 * self.h, g[2] as f64 * self.h]
    }

    /// Dense index of the node at lattice index `g`, if interior.
    pub fn lookup(&self, g: [i64; 3]) -> Option<usize> {
        let mut flat = 0usize;
        for axis in (0..3).rev() {
            let rel = g[axis] - self.lo[axis];
            if rel < 0 || rel as usize >= self.shape[axis] {
                return None;
            }
            flat = flat * self.shape[axis] + rel as usize;
        }
        match self.index[flat] {
            EXTERIOR => None,
            n => Some(n as usize),
        }
    }

    pub fn neighbor(&self, a: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut g = self.nodes[a];
        g[axis] += if forward { 1 } else { -1 };
        self.lookup(g)
    }

    /// Nearest lattice node to a point.
    pub fn nearest_lattice(&self, x: &[f64]) -> [i64; 3] {
        let mut g = [0i64; 3];
        for a in 0..self.dim {
            g[a] = (x[a] / self.h).round() as i64;
        }
        g
    }

    /// Membership of an arbitrary point: the source predicate when known,
    /// otherwise the nearest lattice node.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        match &self.source {
            Some(domain) => domain.contains(&x[..self.dim]),
            None => self.lookup(self.nearest_lattice(x)).is_some(),
        }
    }

    /// `M·h^N`.
    pub fn volume(&self) -> f64 {
        self.nodes.len() as f64 * self.h.powi(self.dim as i32)
    }

    /// Boundary size estimate: interior nodes with an exterior neighbor,
    /// times `h^{N-1}`.
    pub fn perimeter_estimate(&self) -> f64 {
        let mut flagged = vec![false; self.nodes.len()];
        for link in &self.boundary {
            flagged[link.node] = true;
        }
        flagged.iter().filter(|f| **f).count() as f64 * self.h.powi(self.dim as i32 - 1)
    }

    /// Largest distance from the origin to a corner of the bounding grid.
    pub fn extent_radius(&self) -> f64 {
        let mut total = 0.0;
        for a in 0..self.dim {
            let lo = self.lo[a] as f64 * self.h;
            let hi = (self.lo[a] + self.shape[a] as i64 - 1) as f64 * self.h;
            let m = lo.abs().max(hi.abs());
            total += m * m;
        }
        total.sqrt()
    }

    /// Whether every interior node of `self` is interior in `other`.
    pub fn is_subset_of(&self, other: &RasterDomain) -> bool {
        self.h == other.h && self.nodes.iter().all(|g| other.lookup(*g).is_some())
    }
}

/// `M·h^N` of a raster.
pub fn volume(raster: &RasterDomain) -> f64 {
    raster.volume()
}
