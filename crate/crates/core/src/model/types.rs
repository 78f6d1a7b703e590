use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A planar point in state-space units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Rectangular region holding every activity centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Cell side length used for Riemann integration over the region.
    pub grid_resolution: f64,
}

impl StateSpace {
    pub fn new(x: (f64, f64), y: (f64, f64), grid_resolution: f64) -> Result<Self> {
        let s = StateSpace {
            x_min: x.0,
            x_max: x.1,
            y_min: y.0,
            y_max: y.1,
            grid_resolution,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.width();
        let h = self.height();
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::arg(format!("state space sides must be positive, got {w} x {h}")));
        }
        if !(self.grid_resolution > 0.0 && self.grid_resolution < w.min(h)) {
            return Err(Error::arg(format!(
                "grid resolution {} must lie in (0, {})",
                self.grid_resolution,
                w.min(h)
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Reflects a coordinate back into `[lo, hi]`.
    fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
        let span = hi - lo;
        // Fold onto a period of 2*span, then mirror the upper half.
        v = (v - lo).rem_euclid(2.0 * span);
        if v > span {
            v = 2.0 * span - v;
        }
        lo + v
    }

    /// Reflects `p` at the boundary so the result lies inside the region.
    pub fn reflect_into(&self, p: Point) -> Point {
        Point::new(
            Self::reflect(p.x, self.x_min, self.x_max),
            Self::reflect(p.y, self.y_min, self.y_max),
        )
    }

    /// Centres of the integration grid at `resolution`.
    ///
    /// The resolution has to divide both sides evenly.
    pub fn grid_at(&self, resolution: f64) -> Result<Vec<Point>> {
        let count = |side: f64| -> Result<usize> {
            if !(resolution > 0.0) {
                return Err(Error::arg("grid resolution must be positive"));
            }
            let n = side / resolution;
            let rounded = n.round();
            if rounded < 1.0 || (n - rounded).abs() > 1e-9 * n.max(1.0) {
                return Err(Error::arg(format!(
                    "grid resolution {resolution} does not divide side {side} evenly"
                )));
            }
            Ok(rounded as usize)
        };
        let nx = count(self.width())?;
        let ny = count(self.height())?;
        let dx = self.width() / nx as f64;
        let dy = self.height() / ny as f64;
        let mut cells = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                cells.push(Point::new(
                    self.x_min + (ix as f64 + 0.5) * dx,
                    self.y_min + (iy as f64 + 0.5) * dy,
                ));
            }
        }
        Ok(cells)
    }

    /// Integration grid at the configured resolution.
    pub fn grid(&self) -> Result<Vec<Point>> {
        self.grid_at(self.grid_resolution)
    }
}

/// Trap stations; each holds two collocated detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapGrid {
    locations: Vec<Point>,
}

impl TrapGrid {
    pub fn new(locations: Vec<Point>, statespace: &StateSpace) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::arg("trap grid needs at least one trap"));
        }
        if let Some(p) = locations.iter().find(|p| !statespace.contains(p)) {
            return Err(Error::arg(format!(
                "trap at ({}, {}) lies outside the state space",
                p.x, p.y
            )));
        }
        Ok(TrapGrid { locations })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    /// Squared distances from `s` to every trap.
    pub fn dist2_row(&self, s: &Point, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(&self.locations) {
            *o = s.dist2(x);
        }
    }
}

/// The four candidate models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    /// Arrival/detection model with sex-specific movement.
    M1,
    /// Direct detection model with sex-specific movement.
    M2,
    /// Arrival/detection model.
    M3,
    /// Direct detection model.
    M4,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4];

    pub fn has_sex(self) -> bool {
        matches!(self, ModelId::M1 | ModelId::M2)
    }

    /// Models that separate trap entry (omega0) from detection given entry (phi).
    pub fn uses_arrival(self) -> bool {
        matches!(self, ModelId::M1 | ModelId::M3)
    }

    pub fn active_params(self) -> &'static [Param] {
        use Param::*;
        match self {
            ModelId::M1 => &[Psi, Theta, Phi, Omega0, SigmaM, SigmaF],
            ModelId::M2 => &[Psi, Theta, P0, SigmaM, SigmaF],
            ModelId::M3 => &[Psi, Phi, Omega0, Sigma],
            ModelId::M4 => &[Psi, P0, Sigma],
        }
    }

    pub fn is_active(self, p: Param) -> bool {
        self.active_params().contains(&p)
    }

    /// Complexity rank used to break exact ties (lower is simpler).
    pub fn complexity(self) -> u8 {
        match self {
            ModelId::M4 => 0,
            ModelId::M3 => 1,
            ModelId::M2 => 2,
            ModelId::M1 => 3,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelId::M1 => "M1",
            ModelId::M2 => "M2",
            ModelId::M3 => "M3",
            ModelId::M4 => "M4",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M1" => Ok(ModelId::M1),
            "M2" => Ok(ModelId::M2),
            "M3" => Ok(ModelId::M3),
            "M4" => Ok(ModelId::M4),
            other => Err(Error::arg(format!("unknown model '{other}'"))),
        }
    }
}

/// Scalar parameter names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    Psi,
    Theta,
    Phi,
    Omega0,
    P0,
    Sigma,
    SigmaM,
    SigmaF,
}

impl Param {
    pub const ALL: [Param; 8] = [
        Param::Psi,
        Param::Theta,
        Param::Phi,
        Param::Omega0,
        Param::P0,
        Param::Sigma,
        Param::SigmaM,
        Param::SigmaF,
    ];

    /// Movement-scale parameters live on (0, R); the rest on (0, 1).
    pub fn is_length(self) -> bool {
        matches!(self, Param::Sigma | Param::SigmaM | Param::SigmaF)
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::Psi => "psi",
            Param::Theta => "theta",
            Param::Phi => "phi",
            Param::Omega0 => "omega0",
            Param::P0 => "p0",
            Param::Sigma => "sigma",
            Param::SigmaM => "sigma_m",
            Param::SigmaF => "sigma_f",
        }
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| Error::arg(format!("unknown parameter '{s}'")))
    }
}

/// Scalar parameter block. Fields a model does not use are left as NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub psi: f64,
    pub theta: f64,
    pub phi: f64,
    pub omega0: f64,
    pub p0: f64,
    pub sigma: f64,
    pub sigma_m: f64,
    pub sigma_f: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            psi: f64::NAN,
            theta: f64::NAN,
            phi: f64::NAN,
            omega0: f64::NAN,
            p0: f64::NAN,
            sigma: f64::NAN,
            sigma_m: f64::NAN,
            sigma_f: f64::NAN,
        }
    }
}

impl ModelParams {
    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Psi => self.psi,
            Param::Theta => self.theta,
            Param::Phi => self.phi,
            Param::Omega0 => self.omega0,
            Param::P0 => self.p0,
            Param::Sigma => self.sigma,
            Param::SigmaM => self.sigma_m,
            Param::SigmaF => self.sigma_f,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::Psi => self.psi = v,
            Param::Theta => self.theta = v,
            Param::Phi => self.phi = v,
            Param::Omega0 => self.omega0 = v,
            Param::P0 => self.p0 = v,
            Param::Sigma => self.sigma = v,
            Param::SigmaM => self.sigma_m = v,
            Param::SigmaF => self.sigma_f = v,
        }
    }

    /// Active values in `model.active_params()` order.
    pub fn to_vec(&self, model: ModelId) -> Vec<f64> {
        model.active_params().iter().map(|&p| self.get(p)).collect()
    }

    pub fn from_slice(model: ModelId, values: &[f64]) -> Self {
        let mut out = ModelParams::default();
        for (&p, &v) in model.active_params().iter().zip(values) {
            out.set(p, v);
        }
        out
    }

    /// Copy with every inactive field reset to NaN.
    pub fn restricted_to(&self, model: ModelId) -> Self {
        ModelParams::from_slice(model, &self.to_vec(model))
    }

    /// Movement scale for an individual of sex `male` under `model`.
    #[inline]
    pub fn sigma_for(&self, model: ModelId, male: bool) -> f64 {
        if model.has_sex() {
            if male {
                self.sigma_m
            } else {
                self.sigma_f
            }
        } else {
            self.sigma
        }
    }

    /// Baseline probability at distance zero (omega0 or p0).
    #[inline]
    pub fn baseline(&self, model: ModelId) -> f64 {
        if model.uses_arrival() {
            self.omega0
        } else {
            self.p0
        }
    }

    /// True when every active value lies in its prior support.
    pub fn in_support(&self, model: ModelId, prior: &PriorSpec) -> bool {
        model.active_params().iter().all(|&p| {
            let v = self.get(p);
            let hi = if p.is_length() { prior.r } else { 1.0 };
            v > 0.0 && v < hi
        })
    }

    /// Prior means: 1/2 for probabilities, R/2 for movement scales.
    pub fn prior_means(model: ModelId, prior: &PriorSpec) -> Self {
        let mut out = ModelParams::default();
        for &p in model.active_params() {
            out.set(p, if p.is_length() { prior.r / 2.0 } else { 0.5 });
        }
        out
    }
}

/// Prior hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Upper bound of the Uniform(0, R) prior on movement scales.
    pub r: f64,
}

impl PriorSpec {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::arg(format!("prior bound R must be positive, got {r}")));
        }
        Ok(PriorSpec { r })
    }

    /// Default bound: the diagonal of the state space.
    pub fn for_statespace(s: &StateSpace) -> Self {
        PriorSpec { r: s.diagonal() }
    }
}

/// Latent identity: `forward[r]` is the true index of detector-2 row `r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    forward: Vec<u32>,
    #[serde(skip)]
    inverse: Vec<u32>,
}

impl Permutation {
    pub fn identity(m: usize) -> Self {
        let forward: Vec<u32> = (0..m as u32).collect();
        Permutation {
            inverse: forward.clone(),
            forward,
        }
    }

    pub fn from_vec(forward: Vec<u32>) -> Result<Self> {
        let m = forward.len();
        let mut inverse = vec![u32::MAX; m];
        for (r, &i) in forward.iter().enumerate() {
            let slot = inverse
                .get_mut(i as usize)
                .ok_or_else(|| Error::invariant(format!("permutation image {i} out of range {m}")))?;
            if *slot != u32::MAX {
                return Err(Error::invariant(format!("permutation maps two rows to {i}")));
            }
            *slot = r as u32;
        }
        Ok(Permutation { forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// True index of detector-2 row `r`.
    #[inline]
    pub fn image(&self, r: usize) -> usize {
        self.forward[r] as usize
    }

    /// Detector-2 row assigned to true index `i`.
    #[inline]
    pub fn preimage(&self, i: usize) -> usize {
        self.inverse[i] as usize
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.forward
    }

    /// Exchanges the true indices of detector-2 rows `r1` and `r2`.
    pub fn swap_rows(&mut self, r1: usize, r2: usize) {
        self.forward.swap(r1, r2);
        self.inverse[self.forward[r1] as usize] = r1 as u32;
        self.inverse[self.forward[r2] as usize] = r2 as u32;
    }

    pub fn inverted(&self) -> Permutation {
        Permutation {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    /// Rebuilds the inverse table (needed after deserialisation).
    pub fn rebuild(self) -> Result<Self> {
        Permutation::from_vec(self.forward)
    }
}

/// High-dimensional latent block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub z: Vec<bool>,
    /// Sex (true = male). Entries fixed by observed labels are kept in sync by the sampler.
    pub u: Vec<bool>,
    pub s: Vec<Point>,
    pub l: Permutation,
}

impl LatentState {
    pub fn m(&self) -> usize {
        self.z.len()
    }

    pub fn n_real(&self) -> usize {
        self.z.iter().filter(|&&z| z).count()
    }

    pub fn n_male(&self) -> usize {
        self.z.iter().zip(&self.u).filter(|(&z, &u)| z && u).count()
    }

    /// Checks shape and support invariants.
    pub fn validate(&self, statespace: &StateSpace) -> Result<()> {
        let m = self.z.len();
        if self.u.len() != m || self.s.len() != m || self.l.len() != m {
            return Err(Error::invariant("latent vectors disagree in length"));
        }
        if let Some(i) = self.s.iter().position(|p| !statespace.contains(p)) {
            return Err(Error::invariant(format!("activity centre {i} outside state space")));
        }
        Ok(())
    }
}
