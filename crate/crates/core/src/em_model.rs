//! Thin-wire impedance model: geometry of the link and the self/mutual
//! impedances that feed the end-to-end channel.
//!
//! All wires are parallel to the z axis. Mutual impedances come from the
//! induced-EMF reaction integral between two sinusoidal current profiles,
//!
//! ```text
//! Z_qp = -1/(I_p(0) I_q(0)) * ∫_q ∫_p I_q(z) K(rho, z - z') I_p(z') dz' dz
//! ```
//!
//! where `K` is the z-directed field of a z-directed current element. Both
//! integrals use composite Gauss-Legendre panels, graded geometrically toward
//! the points where the kernel is sharply peaked (scale = closest approach),
//! and split at the current-profile kinks.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::numerics::{ComplexMatrix, ComplexVector, GaussLegendre, NumericsError, C64};

/// Free-space wave impedance (Ohm).
pub const ETA0: f64 = 376.730313668;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Gauss-Legendre points per panel.
pub const DEFAULT_QUADRATURE_ORDER: usize = 24;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid wire: {0}")]
    InvalidWire(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Length of the projection onto the x-y plane.
    pub fn transverse_norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// A z-oriented, perfectly conducting thin wire centered at `position`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireElement {
    pub position: Vec3,
    pub length: f64,
    pub radius: f64,
}

impl WireElement {
    /// Checks the thin-wire regime `0 < radius < length / 10`.
    pub fn new(position: Vec3, length: f64, radius: f64) -> Result<Self, EmError> {
        let w = Self {
            position,
            length,
            radius,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), EmError> {
        if !self.position.is_finite() {
            return Err(EmError::InvalidWire(format!("position {} is not finite", self.position)));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(EmError::InvalidWire(format!("length {} must be > 0", self.length)));
        }
        if !(self.radius > 0.0) {
            return Err(EmError::InvalidWire(format!("radius {} must be > 0", self.radius)));
        }
        if self.radius >= self.length / 10.0 {
            return Err(EmError::InvalidWire(format!(
                "radius {} is not thin relative to length {}",
                self.radius, self.length
            )));
        }
        Ok(())
    }

    fn span(&self) -> (f64, f64) {
        let h = 0.5 * self.length;
        (self.position.z - h, self.position.z + h)
    }

    fn sort_key(&self) -> [f64; 5] {
        [
            self.position.x,
            self.position.y,
            self.position.z,
            self.length,
            self.radius,
        ]
    }
}

/// Plane spanned by the RIS grid; wires always point along z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RisPlane {
    #[default]
    Xz,
    Yz,
}

/// Full geometric and circuit description of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub frequency_hz: f64,
    pub tx: WireElement,
    pub rx: WireElement,
    pub ris_side: usize,
    pub spacing_m: f64,
    pub ris_center: Vec3,
    pub ris_wire_length: f64,
    pub ris_wire_radius: f64,
    pub ris_plane: RisPlane,
    pub r0_ohm: f64,
    pub y0: C64,
    pub direct_link: bool,
}

impl Scenario {
    /// 28 GHz setup: Tx at (5, -5, 3) m, Rx at (5, 5, 1) m, RIS at the origin,
    /// identical wires with l = λ/32 and a = λ/500, R0 = 0.2 Ohm, no direct link.
    pub fn paper_28ghz(ris_side: usize, spacing_over_lambda: f64) -> Self {
        let f = 28.0e9;
        let lambda = SPEED_OF_LIGHT / f;
        let l = lambda / 32.0;
        let a = lambda / 500.0;
        Self {
            frequency_hz: f,
            tx: WireElement {
                position: Vec3::new(5.0, -5.0, 3.0),
                length: l,
                radius: a,
            },
            rx: WireElement {
                position: Vec3::new(5.0, 5.0, 1.0),
                length: l,
                radius: a,
            },
            ris_side,
            spacing_m: spacing_over_lambda * lambda,
            ris_center: Vec3::default(),
            ris_wire_length: l,
            ris_wire_radius: a,
            ris_plane: RisPlane::Xz,
            r0_ohm: 0.2,
            y0: C64::new(1.0, 0.0),
            direct_link: false,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }

    pub fn n_ris(&self) -> usize {
        self.ris_side * self.ris_side
    }

    pub fn with_ris(&self, ris_side: usize, spacing_m: f64) -> Self {
        Self {
            ris_side,
            spacing_m,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), EmError> {
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(EmError::InvalidScenario("frequency must be > 0".into()));
        }
        if self.ris_side == 0 {
            return Err(EmError::InvalidScenario("RIS side M must be >= 1".into()));
        }
        if !(self.spacing_m > 0.0 && self.spacing_m.is_finite()) {
            return Err(EmError::InvalidScenario("element spacing must be > 0".into()));
        }
        if !(self.r0_ohm >= 0.0 && self.r0_ohm.is_finite()) {
            return Err(EmError::InvalidScenario("R0 must be >= 0".into()));
        }
        if !self.y0.is_finite() {
            return Err(EmError::InvalidScenario("Y0 must be finite".into()));
        }
        if !self.ris_center.is_finite() {
            return Err(EmError::InvalidScenario("RIS center must be finite".into()));
        }
        self.tx.validate()?;
        self.rx.validate()?;
        self.ris_template().validate()?;
        Ok(())
    }

    fn ris_template(&self) -> WireElement {
        WireElement {
            position: self.ris_center,
            length: self.ris_wire_length,
            radius: self.ris_wire_radius,
        }
    }

    pub fn ris_elements(&self) -> Vec<WireElement> {
        build_ris_grid(self.ris_side, self.spacing_m, self.ris_center, self.ris_plane)
            .into_iter()
            .map(|position| WireElement {
                position,
                ..self.ris_template()
            })
            .collect()
    }

    /// Largest extent of the surface, including one wire length.
    pub fn ris_aperture(&self) -> f64 {
        let side = (self.ris_side as f64 - 1.0) * self.spacing_m;
        (2.0f64).sqrt() * side + self.ris_wire_length
    }
}

/// Element centers of an `m x m` grid, row-major.
///
/// Rows run along the in-plane horizontal axis (x for [`RisPlane::Xz`], y for
/// [`RisPlane::Yz`]); successive rows step along z.
pub fn build_ris_grid(m: usize, spacing: f64, center: Vec3, plane: RisPlane) -> Vec<Vec3> {
    let offset = |idx: usize| (idx as f64 - (m as f64 - 1.0) / 2.0) * spacing;
    let mut out = Vec::with_capacity(m * m);
    for row in 0..m {
        for col in 0..m {
            let (h, v) = (offset(col), offset(row));
            let delta = match plane {
                RisPlane::Xz => Vec3::new(h, 0.0, v),
                RisPlane::Yz => Vec3::new(0.0, h, v),
            };
            out.push(center + delta);
        }
    }
    out
}

/// E_z at transverse offset `delta_rho` and axial offset `delta_z` from a
/// z-directed current element of unit moment.
pub fn dipole_ez_kernel(delta_rho: f64, delta_z: f64, k0: f64) -> Result<C64, EmError> {
    let r = delta_rho.hypot(delta_z);
    if r == 0.0 {
        return Err(EmError::DegenerateGeometry(
            "field point coincides with the source".into(),
        ));
    }
    Ok(ez_kernel_unchecked(delta_rho, delta_z, k0))
}

#[inline]
fn ez_kernel_unchecked(delta_rho: f64, delta_z: f64, k0: f64) -> C64 {
    let r2 = delta_rho * delta_rho + delta_z * delta_z;
    let r = r2.sqrt();
    let cos2 = delta_z * delta_z / r2;
    let sin2 = delta_rho * delta_rho / r2;
    let kr = k0 * r;
    // 1/(j kr) = -j/(kr)
    let inv_jkr = C64::new(0.0, -1.0 / kr);
    let radial = (1.0 + inv_jkr) * (2.0 * cos2 / r2);
    let transverse = C64::new(0.0, -k0 * sin2 / r) * (1.0 + inv_jkr - 1.0 / (kr * kr));
    let phase = C64::from_polar(ETA0 / (4.0 * PI), -kr);
    phase * (radial + transverse)
}

/// Sinusoidal current profile normalized to one at the feed.
#[inline]
fn feed_normalized_current(offset: f64, length: f64, k0: f64, feed: f64) -> f64 {
    let s = 0.5 * length - offset.abs();
    if s <= 0.0 {
        0.0
    } else {
        (k0 * s).sin() / feed
    }
}

/// Induced-EMF impedance evaluator.
#[derive(Debug, Clone)]
pub struct InducedEmf {
    rule: GaussLegendre,
    fault_scale: f64,
}

impl Default for InducedEmf {
    fn default() -> Self {
        Self::new(DEFAULT_QUADRATURE_ORDER).expect("default order is valid")
    }
}

impl InducedEmf {
    pub fn new(order: usize) -> Result<Self, EmError> {
        Ok(Self {
            rule: GaussLegendre::new(order)?,
            fault_scale: 1.0,
        })
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    /// Test hook: scales every returned impedance by `1 + relative_error`.
    #[doc(hidden)]
    pub fn with_injected_error(mut self, relative_error: f64) -> Self {
        self.fault_scale = 1.0 + relative_error;
        self
    }

    /// Mutual impedance between two distinct parallel wires. Symmetric in its
    /// arguments bit-for-bit.
    pub fn mutual_impedance(&self, p: &WireElement, q: &WireElement, k0: f64) -> Result<C64, EmError> {
        p.validate()?;
        q.validate()?;
        let rho = (q.position - p.position).transverse_norm();
        let dz = (q.position.z - p.position.z).abs();
        let half_sum = 0.5 * (p.length + q.length);
        let scale = p.length.max(q.length);
        if rho <= 1e-12 * scale && dz <= half_sum * (1.0 + 1e-12) {
            return Err(EmError::DegenerateGeometry(format!(
                "collinear wires at {} and {} overlap or touch",
                p.position, q.position
            )));
        }
        let (observer, source) = if p.sort_key() <= q.sort_key() { (q, p) } else { (p, q) };
        Ok(self.reaction(observer, source, rho, k0)? * self.fault_scale)
    }

    /// Self impedance: the reaction integral with the field taken on the wire
    /// surface (transverse offset = radius).
    pub fn self_impedance(&self, p: &WireElement, k0: f64) -> Result<C64, EmError> {
        if !(p.radius > 0.0) {
            return Err(EmError::DegenerateGeometry("self impedance needs radius > 0".into()));
        }
        p.validate()?;
        Ok(self.reaction(p, p, p.radius, k0)? * self.fault_scale)
    }

    /// Raw reaction integral with `observer` on the outside loop. Exposed so
    /// reciprocity can be checked without the canonical argument ordering.
    #[doc(hidden)]
    pub fn reaction(
        &self,
        observer: &WireElement,
        source: &WireElement,
        rho: f64,
        k0: f64,
    ) -> Result<C64, EmError> {
        let feed_obs = (0.5 * k0 * observer.length).sin();
        let feed_src = (0.5 * k0 * source.length).sin();
        if feed_obs.abs() < 1e-9 || feed_src.abs() < 1e-9 {
            return Err(EmError::DegenerateGeometry(
                "wire length is a multiple of the wavelength; feed current vanishes".into(),
            ));
        }
        let (q_lo, q_hi) = observer.span();
        let (p_lo, p_hi) = source.span();
        let zp = source.position.z;
        let zq = observer.position.z;

        let outer_foci: Vec<(f64, f64)> = [zp, p_lo, p_hi]
            .iter()
            .map(|&f| {
                let clamped = f.clamp(q_lo, q_hi);
                (clamped, rho.hypot(f - clamped))
            })
            .collect();
        let outer = graded_breakpoints(q_lo, q_hi, &outer_foci, &[zq]);

        let mut total = C64::new(0.0, 0.0);
        let mut inner_points = Vec::new();
        for win in outer.windows(2) {
            for (z, w) in self.rule.mapped(win[0], win[1]) {
                let iq = feed_normalized_current(z - zq, observer.length, k0, feed_obs);
                if iq == 0.0 {
                    continue;
                }
                let nearest = z.clamp(p_lo, p_hi);
                let focus = (nearest, rho.hypot(z - nearest));
                if focus.1 == 0.0 {
                    return Err(EmError::DegenerateGeometry(
                        "observation point lies on the source wire".into(),
                    ));
                }
                inner_points.clear();
                inner_points.extend(graded_breakpoints(p_lo, p_hi, &[focus], &[zp]));
                let mut field = C64::new(0.0, 0.0);
                for iw in inner_points.windows(2) {
                    for (zs, ws) in self.rule.mapped(iw[0], iw[1]) {
                        let ip = feed_normalized_current(zs - zp, source.length, k0, feed_src);
                        if ip == 0.0 {
                            continue;
                        }
                        field += ez_kernel_unchecked(rho, z - zs, k0) * (ip * ws);
                    }
                }
                total += field * (iq * w);
            }
        }
        Ok(-total)
    }
}

/// Panel edges on [lo, hi]: split at `splits`, and around each `(point, scale)`
/// focus add edges at `point ± scale * 2^m` so panels near the focus are no
/// wider than their distance to the kernel's complex singularity.
fn graded_breakpoints(lo: f64, hi: f64, foci: &[(f64, f64)], splits: &[f64]) -> Vec<f64> {
    let width = hi - lo;
    let mut pts = vec![lo, hi];
    pts.extend(splits.iter().copied().filter(|&s| s > lo && s < hi));
    for &(point, scale) in foci {
        if !(scale > 0.0) || scale >= width {
            continue;
        }
        if point > lo && point < hi {
            pts.push(point);
        }
        let mut h = scale;
        while h < width {
            for e in [point - h, point + h] {
                if e > lo && e < hi {
                    pts.push(e);
                }
            }
            h *= 2.0;
        }
    }
    pts.sort_by(f64::total_cmp);
    let tol = 1e-13 * width;
    pts.dedup_by(|a, b| (*a - *b).abs() <= tol);
    // dedup may have merged `hi` into a neighbour; keep the exact end.
    if let Some(last) = pts.last_mut() {
        *last = hi;
    }
    pts
}

/// Mutual impedance with the default quadrature order.
pub fn mutual_impedance(p: &WireElement, q: &WireElement, k0: f64) -> Result<C64, EmError> {
    InducedEmf::default().mutual_impedance(p, q, k0)
}

/// Self impedance with the default quadrature order.
pub fn self_impedance(p: &WireElement, k0: f64) -> Result<C64, EmError> {
    InducedEmf::default().self_impedance(p, k0)
}

/// Impedance description of a link: `Z_RT`, `z_ST`, `z_RS` and `Z_SS`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceNetwork {
    pub z_rt: C64,
    pub z_st: ComplexVector,
    pub z_rs: ComplexVector,
    pub z_ss: ComplexMatrix,
}

impl ImpedanceNetwork {
    pub fn new(
        z_rt: C64,
        z_st: ComplexVector,
        z_rs: ComplexVector,
        z_ss: ComplexMatrix,
    ) -> Result<Self, EmError> {
        let n = z_st.len();
        if z_rs.len() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                actual: z_rs.len(),
            }
            .into());
        }
        if z_ss.rows() != n || z_ss.cols() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                actual: z_ss.rows(),
            }
            .into());
        }
        z_ss.check_finite()?;
        if !z_rt.is_finite() {
            return Err(EmError::InvalidScenario("Z_RT must be finite".into()));
        }
        Ok(Self {
            z_rt,
            z_st,
            z_rs,
            z_ss,
        })
    }

    pub fn len(&self) -> usize {
        self.z_st.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Copy with every off-diagonal entry of `Z_SS` set to zero.
    pub fn diagonal_only(&self) -> Self {
        let mut out = self.clone();
        out.z_ss = ComplexMatrix::from_diagonal(&self.z_ss.diagonal());
        out
    }

    /// Largest relative asymmetry `|Z(i,j) - Z(j,i)| / max|Z|`.
    pub fn reciprocity_error(&self) -> f64 {
        let n = self.len();
        let scale = self.z_ss.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.z_ss[(i, j)] - self.z_ss[(j, i)]).norm() / scale);
            }
        }
        worst
    }

    /// Checks reciprocity, positive radiation resistance and a uniform diagonal.
    pub fn check_invariants(&self, rel_tol: f64) -> Result<(), String> {
        let asym = self.reciprocity_error();
        if asym > rel_tol {
            return Err(format!("Z_SS is not symmetric (relative error {asym:e})"));
        }
        let diag = self.z_ss.diagonal();
        if let Some(i) = diag.iter().position(|z| !(z.re > 0.0)) {
            return Err(format!("Re Z_SS({i},{i}) = {} is not positive", diag[i].re));
        }
        let d0 = diag[0];
        if let Some(i) = diag.iter().position(|z| (z - d0).norm() > rel_tol * d0.norm()) {
            return Err(format!("Z_SS({i},{i}) differs from Z_SS(0,0)"));
        }
        Ok(())
    }
}

/// Assembles the impedance network of a scenario with the default quadrature.
pub fn assemble_network(s: &Scenario) -> Result<ImpedanceNetwork, EmError> {
    assemble_network_with(s, &InducedEmf::default())
}

pub fn assemble_network_with(s: &Scenario, emf: &InducedEmf) -> Result<ImpedanceNetwork, EmError> {
    s.validate()?;
    let k0 = s.wavenumber();
    let lambda = s.wavelength();
    let elements = s.ris_elements();
    let n = elements.len();

    let aperture = s.ris_aperture();
    let fraunhofer = 2.0 * aperture * aperture / lambda;
    for (name, w) in [("transmitter", &s.tx), ("receiver", &s.rx)] {
        let dist = (w.position - s.ris_center).norm();
        if dist <= fraunhofer {
            warn!(
                "{name} at {:.3} m from the RIS is inside the far-field distance {:.3} m",
                dist, fraunhofer
            );
        }
    }

    // Every RIS element shares one geometry, so the diagonal is one value.
    let z_self = emf.self_impedance(&elements[0], k0)?;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let off_diag: Vec<C64> = pairs
        .par_iter()
        .map(|&(i, j)| emf.mutual_impedance(&elements[i], &elements[j], k0))
        .collect::<Result<_, _>>()?;
    let mut z_ss = ComplexMatrix::from_diagonal(&vec![z_self; n]);
    for (&(i, j), &z) in pairs.iter().zip(&off_diag) {
        z_ss[(i, j)] = z;
        z_ss[(j, i)] = z;
    }

    let z_st: Vec<C64> = elements
        .par_iter()
        .map(|e| emf.mutual_impedance(e, &s.tx, k0))
        .collect::<Result<_, _>>()?;
    let z_rs: Vec<C64> = elements
        .par_iter()
        .map(|e| emf.mutual_impedance(&s.rx, e, k0))
        .collect::<Result<_, _>>()?;
    let z_rt = if s.direct_link {
        emf.mutual_impedance(&s.rx, &s.tx, k0)?
    } else {
        Complex64::new(0.0, 0.0)
    };
    ImpedanceNetwork::new(z_rt, ComplexVector::new(z_st)?, ComplexVector::new(z_rs)?, z_ss)
}
