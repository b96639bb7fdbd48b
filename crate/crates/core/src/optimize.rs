//! Maximizing the distillation gain over the quantum-attainable part of the
//! `(η, γ)` family.
//!
//! Two independent strategies are provided. [`grid_search`] scans a 2-D grid
//! and filters by the arcsine criterion; [`boundary_search`] runs a 1-D
//! golden-section search along the planar measurement family, which traces
//! the boundary of the attainable region. [`consistency_report`] runs both
//! and compares them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxes::EtaGammaParams;
use crate::distill::gain;
use crate::error::{Error, Result};
use crate::quantum::{eta_gamma_from_phi, tlm_slack, PlanarAngle};

/// Upper end of the η axis searched by the grid.
pub const ETA_MAX: f64 = 1.0 / 6.0;
/// Upper end of the γ axis searched by the grid.
pub const GAMMA_MAX: f64 = 0.5;
/// Smallest accepted grid resolution.
pub const MIN_RESOLUTION: usize = 100;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Which part of the family the grid keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// `γ > 3η`, where the family violates the local bound.
    #[default]
    Nonlocal,
    /// `γ ≤ 3η`.
    Local,
    Full,
}

impl Region {
    fn contains(self, eta: f64, gamma: f64) -> bool {
        match self {
            Region::Nonlocal => gamma > 3.0 * eta,
            Region::Local => gamma <= 3.0 * eta,
            Region::Full => true,
        }
    }
}

/// One evaluated grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub eta: f64,
    pub gamma: f64,
    pub gain: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridOptimum {
    pub params: EtaGammaParams,
    pub gain: f64,
    /// Arcsine-criterion slack at the optimum (non-positive inside).
    pub slack: f64,
    pub resolution: usize,
    pub feasible_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryOptimum {
    pub phi: PlanarAngle,
    pub phi_degrees: f64,
    pub params: EtaGammaParams,
    pub gain: f64,
    pub slack: f64,
    pub iterations: usize,
}

/// Cell-centred grid coordinate `i` of `resolution` over `(0, max)`.
fn axis(i: usize, resolution: usize, max: f64) -> f64 {
    (i as f64 + 0.5) / resolution as f64 * max
}

fn evaluate(eta: f64, gamma: f64, tol: f64) -> GridPoint {
    let params = EtaGammaParams::new(eta, gamma).expect("grid nodes lie inside (0, 1)²");
    GridPoint {
        eta,
        gamma,
        gain: gain(params),
        feasible: tlm_slack(&params.correlators()) <= tol,
    }
}

/// Total order used for the reduction: larger gain wins, then smaller η,
/// then smaller γ. Independent of evaluation order.
fn better(a: GridPoint, b: GridPoint) -> GridPoint {
    use std::cmp::Ordering::*;
    match a.gain.partial_cmp(&b.gain).unwrap_or(Equal) {
        Greater => a,
        Less => b,
        Equal => match a.eta.partial_cmp(&b.eta).unwrap_or(Equal) {
            Less => a,
            Greater => b,
            Equal => {
                if a.gamma <= b.gamma {
                    a
                } else {
                    b
                }
            }
        },
    }
}

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Domain {
            name: "resolution",
            value: resolution as f64,
            domain: ">= 100",
        });
    }
    Ok(())
}

/// Gain-maximizing attainable point on the nonlocal branch of a
/// `resolution × resolution` grid over `(0, 1/6) × (0, 1/2)`.
pub fn grid_search(resolution: usize, tol: f64) -> Result<GridOptimum> {
    grid_search_in(resolution, tol, Region::Nonlocal)
}

pub fn grid_search_in(resolution: usize, tol: f64, region: Region) -> Result<GridOptimum> {
    check_resolution(resolution)?;
    let (best, feasible_points) = (0..resolution)
        .into_par_iter()
        .map(|i| {
            let eta = axis(i, resolution, ETA_MAX);
            let mut best: Option<GridPoint> = None;
            let mut count = 0usize;
            for j in 0..resolution {
                let gamma = axis(j, resolution, GAMMA_MAX);
                if !region.contains(eta, gamma) {
                    continue;
                }
                let p = evaluate(eta, gamma, tol);
                if !p.feasible {
                    continue;
                }
                count += 1;
                best = Some(match best {
                    Some(b) => better(b, p),
                    None => p,
                });
            }
            (best, count)
        })
        .reduce(
            || (None, 0),
            |(a, na), (b, nb)| {
                let best = match (a, b) {
                    (Some(a), Some(b)) => Some(better(a, b)),
                    (a, None) => a,
                    (None, b) => b,
                };
                (best, na + nb)
            },
        );
    let best = best.ok_or(Error::EmptyRegion)?;
    let params = EtaGammaParams::new(best.eta, best.gamma)?;
    Ok(GridOptimum {
        params,
        gain: best.gain,
        slack: tlm_slack(&params.correlators()),
        resolution,
        feasible_points,
    })
}

/// Every grid node in row-major order (η outer, γ inner), for plotting.
pub fn grid_points(resolution: usize, tol: f64) -> Result<Vec<GridPoint>> {
    check_resolution(resolution)?;
    Ok((0..resolution * resolution)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / resolution, k % resolution);
            evaluate(
                axis(i, resolution, ETA_MAX),
                axis(j, resolution, GAMMA_MAX),
                tol,
            )
        })
        .collect())
}

/// Golden-section maximization of `gain(eta_gamma_from_phi(φ))` over
/// `[phi_lo, phi_hi]` (radians), stopping once the bracket is narrower than
/// `tol`.
pub fn boundary_search(phi_lo: f64, phi_hi: f64, tol: f64) -> Result<BoundaryOptimum> {
    if !(phi_lo > 0.0 && phi_lo < phi_hi && phi_hi < PlanarAngle::MAX) || !(tol > 0.0) {
        return Err(Error::InvalidBracket {
            lo: phi_lo,
            hi: phi_hi,
        });
    }
    let f = |phi: f64| {
        gain(eta_gamma_from_phi(
            PlanarAngle::new(phi).expect("inside bracket"),
        ))
    };
    let (mut a, mut b) = (phi_lo, phi_hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let phi = PlanarAngle::new((a + b) / 2.0)?;
    let params = eta_gamma_from_phi(phi);
    Ok(BoundaryOptimum {
        phi,
        phi_degrees: phi.degrees(),
        params,
        gain: gain(params),
        slack: tlm_slack(&params.correlators()),
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub resolution: usize,
    pub feasibility_tol: f64,
    pub phi_lo_degrees: f64,
    pub phi_hi_degrees: f64,
    pub golden_tol: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            resolution: 2000,
            feasibility_tol: 1e-9,
            phi_lo_degrees: 5.0,
            phi_hi_degrees: 25.0,
            golden_tol: 1e-9,
        }
    }
}

impl SearchSettings {
    pub fn grid(&self) -> Result<GridOptimum> {
        grid_search(self.resolution, self.feasibility_tol)
    }

    pub fn boundary(&self) -> Result<BoundaryOptimum> {
        boundary_search(
            self.phi_lo_degrees.to_radians(),
            self.phi_hi_degrees.to_radians(),
            self.golden_tol,
        )
    }
}

/// Cross-check of the two search strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub settings: SearchSettings,
    pub grid: GridOptimum,
    pub boundary: BoundaryOptimum,
    pub eta_difference: f64,
    pub gamma_difference: f64,
    pub gain_difference: f64,
}

pub fn consistency_report(settings: SearchSettings) -> Result<ConsistencyReport> {
    let grid = settings.grid()?;
    let boundary = settings.boundary()?;
    Ok(ConsistencyReport {
        settings,
        eta_difference: (grid.params.eta() - boundary.params.eta()).abs(),
        gamma_difference: (grid.params.gamma() - boundary.params.gamma()).abs(),
        gain_difference: (grid.gain - boundary.gain).abs(),
        grid,
        boundary,
    })
}
