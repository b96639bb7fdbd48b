//! Quantum realization of correlation boxes with spin measurements on a
//! (possibly depolarized) singlet, and the arcsine criterion for quantum
//! attainability of four correlators.
//!
//! The singlet is never represented as a state. Its only observable content
//! here is the correlator rule `C_xy = −v · (n_x · m_y)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::boxes::{
    chsh_of_correlators, pair_index, CondProbTable, EtaGammaParams, TSIRELSON_BOUND,
};
use crate::error::{Error, Result};

/// Tolerance on unit-vector norms and on the planar dot-product contract.
pub const UNIT_TOL: f64 = 1e-12;

/// Four correlators `(C00, C01, C10, C11)`, each in `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationVector(pub(crate) [f64; 4]);

impl CorrelationVector {
    pub fn new(c: [f64; 4]) -> Result<Self> {
        for &v in &c {
            if !(v.abs() <= 1.0 + UNIT_TOL) {
                return Err(Error::Domain {
                    name: "correlator",
                    value: v,
                    domain: "[-1, 1]",
                });
            }
        }
        Ok(Self::clamped(c))
    }

    /// Clamps each entry into `[−1, 1]`; absorbs rounding from table sums.
    pub fn clamped(c: [f64; 4]) -> Self {
        Self(c.map(|v| v.clamp(-1.0, 1.0)))
    }

    pub(crate) fn from_array_unchecked(c: [f64; 4]) -> Self {
        Self(c)
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0[pair_index(x, y)]
    }
}

/// Three-component direction of a spin measurement.
pub type Direction = [f64; 3];

fn dot(a: &Direction, b: &Direction) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Direction) -> f64 {
    dot(a, a).sqrt()
}

/// Measurement directions: Alice measures along `n_x`, Bob along `m_y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFrame {
    n0: Direction,
    n1: Direction,
    m0: Direction,
    m1: Direction,
}

impl MeasurementFrame {
    pub fn new(n0: Direction, n1: Direction, m0: Direction, m1: Direction) -> Result<Self> {
        let frame = Self { n0, n1, m0, m1 };
        frame.validate()?;
        Ok(frame)
    }

    /// Checks that every direction is a unit vector. Deserialized frames are
    /// unchecked until this runs.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n0", &self.n0),
            ("n1", &self.n1),
            ("m0", &self.m0),
            ("m1", &self.m1),
        ] {
            let n = norm(v);
            if !((n - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::NotUnitVector { name, norm: n });
            }
        }
        Ok(())
    }

    pub fn alice(&self, x: usize) -> &Direction {
        if x == 0 {
            &self.n0
        } else {
            &self.n1
        }
    }

    pub fn bob(&self, y: usize) -> &Direction {
        if y == 0 {
            &self.m0
        } else {
            &self.m1
        }
    }

    /// `n_x · m_y` in pair order.
    pub fn dot_products(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|s| dot(self.alice(s / 2), self.bob(s % 2)))
    }

    /// Applies `f` to each of the four directions, renormalizing the result.
    pub fn map_directions(&self, mut f: impl FnMut(&Direction) -> Direction) -> Result<Self> {
        let mut unit = |d: &Direction| {
            let v = f(d);
            let n = norm(&v);
            [v[0] / n, v[1] / n, v[2] / n]
        };
        Self::new(
            unit(&self.n0),
            unit(&self.n1),
            unit(&self.m0),
            unit(&self.m1),
        )
    }
}

/// Planar angle `φ ∈ (0, π/6)` in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PlanarAngle(f64);

impl PlanarAngle {
    pub const MAX: f64 = PI / 6.0;

    pub fn new(radians: f64) -> Result<Self> {
        if radians > 0.0 && radians < Self::MAX {
            Ok(Self(radians))
        } else {
            Err(Error::Domain {
                name: "phi",
                value: radians,
                domain: "(0, π/6) radians",
            })
        }
    }

    pub fn from_degrees(degrees: f64) -> Result<Self> {
        Self::new(degrees.to_radians())
    }

    pub fn radians(&self) -> f64 {
        self.0
    }

    pub fn degrees(&self) -> f64 {
        self.0.to_degrees()
    }
}

/// Scalar multiplying every singlet correlator (depolarizing visibility).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Visibility(f64);

impl Visibility {
    pub const PERFECT: Visibility = Visibility(1.0);

    pub fn new(v: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&v) {
            Ok(Self(v))
        } else {
            Err(Error::Domain {
                name: "visibility",
                value: v,
                domain: "[0, 1]",
            })
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Box produced by measuring a visibility-`v` singlet along `frame`:
/// `P(ab|xy) = [1 + (−1)^(a⊕b) · v · (−n_x·m_y)] / 4`.
pub fn singlet_box(frame: &MeasurementFrame, vis: Visibility) -> Result<CondProbTable> {
    frame.validate()?;
    let dots = frame.dot_products();
    let rows = dots.map(|d| {
        let c = -vis.0 * d;
        let same = (1.0 + c) / 4.0;
        let diff = (1.0 - c) / 4.0;
        [same, diff, diff, same]
    });
    Ok(CondProbTable::from_rows_unchecked(rows))
}

fn in_plane(theta: f64) -> Direction {
    [theta.sin(), 0.0, theta.cos()]
}

/// Coplanar frame in the x–z plane with polar angles `n0 = 0`, `n1 = −2φ`,
/// `m0 = π − φ`, `m1 = π + φ`, giving `n0·m0 = n0·m1 = n1·m0 = −cos φ` and
/// `n1·m1 = −cos 3φ`. The dot products are checked before returning.
pub fn planar_frame(angle: PlanarAngle) -> Result<MeasurementFrame> {
    let phi = angle.0;
    let frame = MeasurementFrame::new(
        in_plane(0.0),
        in_plane(-2.0 * phi),
        in_plane(PI - phi),
        in_plane(PI + phi),
    )?;
    let expect = [-phi.cos(), -phi.cos(), -phi.cos(), -(3.0 * phi).cos()];
    let got = frame.dot_products();
    for (s, (g, e)) in got.iter().zip(expect.iter()).enumerate() {
        if (g - e).abs() > UNIT_TOL {
            return Err(Error::FrameContract(format!(
                "pair {s}: dot product {g}, expected {e}"
            )));
        }
    }
    Ok(frame)
}

/// `η = (1 − cos φ)/2`, `γ = (1 − cos 3φ)/2`.
///
/// Evaluated as `sin²(φ/2)` and `sin²(3φ/2)`, which stay positive for tiny
/// `φ` where `1 − cos φ` rounds to zero.
pub fn eta_gamma_from_phi(angle: PlanarAngle) -> EtaGammaParams {
    let half = angle.0 / 2.0;
    let sq = |v: f64| (v.sin() * v.sin()).max(f64::MIN_POSITIVE);
    EtaGammaParams::new(sq(half), sq(3.0 * half))
        .expect("φ in (0, π/6) keeps η and γ inside (0, 1)")
}

/// Largest arcsine combination over the four minus-sign placements, minus π.
/// Non-positive exactly when the correlators are quantum attainable.
pub fn tlm_slack(c: &CorrelationVector) -> f64 {
    let s = c.0.map(f64::asin);
    let mut worst = f64::NEG_INFINITY;
    for x in 0..2 {
        for y in 0..2 {
            let v = s[pair_index(x, y)] + s[pair_index(x, 1 - y)] + s[pair_index(1 - x, y)]
                - s[pair_index(1 - x, 1 - y)];
            worst = worst.max(v.abs());
        }
    }
    worst - PI
}

/// Arcsine criterion for correlators with unbiased marginals: for every
/// placement of the minus sign,
/// `|asin C_xy + asin C_xȳ + asin C_x̄y − asin C_x̄ȳ| ≤ π`.
/// All four placements are checked regardless of any symmetry in `c`.
pub fn tlm_feasible(c: &CorrelationVector, tol: f64) -> bool {
    tlm_slack(c) <= tol
}

pub fn tsirelson_check(p: &CondProbTable, tol: f64) -> Result<bool> {
    Ok(p.chsh()? <= TSIRELSON_BOUND + tol)
}

/// Visibility at which the planar box at `angle` reaches CHSH value `target`.
pub fn visibility_for_chsh(angle: PlanarAngle, target: f64) -> Result<Visibility> {
    let params = eta_gamma_from_phi(angle);
    let ideal = chsh_of_correlators(&params.correlators().0).value;
    Visibility::new(target / ideal)
}
