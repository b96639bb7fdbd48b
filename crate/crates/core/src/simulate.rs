//! Finite-statistics emulation of the two-source distillation experiment.
//!
//! Single boxes are estimated from pair counts. The distilled box is
//! estimated from four-fold counts that are contaminated by double-pair
//! emission from one source; that background is measured in a separate
//! calibration run and subtracted. Error bars follow from Poissonian cell
//! counts propagated to first order (delta method), with a multinomial
//! bootstrap as an independent check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::boxes::{CondProbTable, DEFAULT_TOL, PAIR_LABELS};
use crate::distill::xor_wire;
use crate::error::{Error, Result};
use crate::quantum::{planar_frame, singlet_box, MeasurementFrame, PlanarAngle, Visibility};

/// Fewest resamples accepted by [`bootstrap_chsh`].
pub const MIN_RESAMPLES: usize = 100;

/// Post-subtraction cells below `-NEGATIVE_CELL_TOL` raise the clamp flag.
pub const NEGATIVE_CELL_TOL: f64 = 1e-12;

/// Sign of outcome pair `ab` in the correlator, `(−1)^(a⊕b)`.
const PARITY: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    visibility: Visibility,
    /// Standard deviation (radians) of the in-plane rotation applied once
    /// per experiment to every measurement direction.
    angle_jitter_sigma: f64,
    /// Fraction of four-fold events caused by double-pair emission.
    background_fraction: f64,
}

impl NoiseModel {
    pub fn new(
        visibility: Visibility,
        angle_jitter_sigma: f64,
        background_fraction: f64,
    ) -> Result<Self> {
        if !(angle_jitter_sigma >= 0.0 && angle_jitter_sigma.is_finite()) {
            return Err(Error::Domain {
                name: "angle_jitter_sigma",
                value: angle_jitter_sigma,
                domain: "[0, ∞)",
            });
        }
        if !(0.0..1.0).contains(&background_fraction) {
            return Err(Error::Domain {
                name: "background_fraction",
                value: background_fraction,
                domain: "[0, 1)",
            });
        }
        Ok(Self {
            visibility,
            angle_jitter_sigma,
            background_fraction,
        })
    }

    pub fn ideal() -> Self {
        Self {
            visibility: Visibility::PERFECT,
            angle_jitter_sigma: 0.0,
            background_fraction: 0.0,
        }
    }

    pub fn visibility(&self) -> Visibility {
        self.visibility
    }

    pub fn angle_jitter_sigma(&self) -> f64 {
        self.angle_jitter_sigma
    }

    pub fn background_fraction(&self) -> f64 {
        self.background_fraction
    }
}

/// Outcome counts per setting pair, in the table layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    counts: [[u64; 4]; 4],
    shots_per_setting: u64,
}

impl CountTable {
    pub fn new(counts: [[u64; 4]; 4], shots_per_setting: u64) -> Result<Self> {
        let t = Self {
            counts,
            shots_per_setting,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots_per_setting == 0 {
            return Err(Error::ZeroShots);
        }
        for (s, row) in self.counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total != self.shots_per_setting {
                return Err(Error::CountMismatch {
                    setting: PAIR_LABELS[s],
                    total,
                    expected: self.shots_per_setting,
                });
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> &[[u64; 4]; 4] {
        &self.counts
    }

    pub fn shots_per_setting(&self) -> u64 {
        self.shots_per_setting
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateMethod {
    Delta,
    Bootstrap,
}

/// Point estimate with a standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub method: EstimateMethod,
}

fn draw_row<R: Rng>(probs: &[f64; 4], shots: u64, rng: &mut R) -> [u64; 4] {
    // Categorical draws via conditional binomials.
    let mut out = [0u64; 4];
    let mut remaining = shots;
    let mut mass = 1.0;
    for k in 0..3 {
        if remaining == 0 {
            break;
        }
        let p = probs[k].max(0.0);
        let ratio = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let n = Binomial::new(remaining, ratio)
            .expect("ratio clamped into [0, 1]")
            .sample(rng);
        out[k] = n;
        remaining -= n;
        mass -= p;
    }
    out[3] = remaining;
    out
}

fn sample_with<R: Rng>(p: &CondProbTable, shots: u64, rng: &mut R) -> Result<CountTable> {
    p.validate(DEFAULT_TOL)?;
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let counts = p.rows().map(|row| draw_row(&row, shots, rng));
    Ok(CountTable {
        counts,
        shots_per_setting: shots,
    })
}

/// Draws `shots` outcomes for every setting from the rows of `p`.
/// Identical `(p, shots, seed)` give identical tables.
pub fn sample_counts(p: &CondProbTable, shots: u64, seed: u64) -> Result<CountTable> {
    sample_with(p, shots, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Maximum-likelihood table, `count / shots` per cell.
pub fn estimate_box(counts: &CountTable) -> Result<CondProbTable> {
    counts.validate()?;
    let n = counts.shots_per_setting as f64;
    Ok(CondProbTable::from_rows_unchecked(
        counts.counts.map(|row| row.map(|c| c as f64 / n)),
    ))
}

/// Variance of each estimated correlator under independent Poissonian cell
/// counts, `Σ_ab (∂C/∂n_ab)² n_ab` with `C = Σ_ab (−1)^(a⊕b) n_ab / Σ n`.
pub fn correlator_variances(counts: &CountTable) -> Result<[f64; 4]> {
    counts.validate()?;
    Ok(counts.counts.map(|row| {
        let total: f64 = row.iter().map(|&c| c as f64).sum();
        let c: f64 = row
            .iter()
            .zip(PARITY)
            .map(|(&n, s)| s * n as f64)
            .sum::<f64>()
            / total;
        row.iter()
            .zip(PARITY)
            .map(|(&n, s)| {
                let d = (s - c) / total;
                d * d * n as f64
            })
            .sum()
    }))
}

fn delta_estimate(table: &CondProbTable, variances: &[f64; 4]) -> Result<Estimate> {
    let term = table.chsh_term()?;
    let var: f64 = (0..4)
        .map(|s| term.coefficient(s).powi(2) * variances[s])
        .sum();
    Ok(Estimate {
        value: term.value,
        stderr: var.sqrt(),
        method: EstimateMethod::Delta,
    })
}

/// CHSH value of the estimated table with a delta-method standard error.
pub fn chsh_estimate(counts: &CountTable) -> Result<Estimate> {
    let variances = correlator_variances(counts)?;
    delta_estimate(&estimate_box(counts)?, &variances)
}

/// Nonparametric bootstrap: each resample redraws every setting's counts
/// from its estimated row; the standard error is the sample standard
/// deviation of the resampled CHSH values. The point value is the plug-in
/// estimate.
pub fn bootstrap_chsh(counts: &CountTable, resamples: usize, seed: u64) -> Result<Estimate> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::TooFewResamples {
            min: MIN_RESAMPLES,
            got: resamples,
        });
    }
    let fitted = estimate_box(counts)?;
    let value = fitted.chsh()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..resamples {
        let resampled = sample_with(&fitted, counts.shots_per_setting, &mut rng)?;
        let v = estimate_box(&resampled)?.chsh()?;
        sum += v;
        sum_sq += v * v;
    }
    let n = resamples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(Estimate {
        value,
        stderr: var.sqrt(),
        method: EstimateMethod::Bootstrap,
    })
}

/// Result of removing a known background fraction from an observed table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtracted {
    pub table: CondProbTable,
    /// True when at least one cell went negative and was clamped to zero.
    pub clamped: bool,
    /// Most negative cell before clamping (zero if none).
    pub min_cell: f64,
}

/// `(observed − f · background) / (1 − f)` per cell, negatives clamped to
/// zero and rows renormalized.
pub fn subtract_background(
    observed: &CondProbTable,
    background: &CondProbTable,
    fraction: f64,
) -> Result<Subtracted> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Domain {
            name: "background_fraction",
            value: fraction,
            domain: "[0, 1)",
        });
    }
    observed.validate(DEFAULT_TOL)?;
    background.validate(DEFAULT_TOL)?;
    let mut min_cell: f64 = 0.0;
    let mut rows = [[0.0; 4]; 4];
    for (s, row) in rows.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            let v = (observed.rows()[s][c] - fraction * background.rows()[s][c]) / (1.0 - fraction);
            min_cell = min_cell.min(v);
            *cell = v.max(0.0);
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
        } else {
            *row = [0.25; 4];
        }
    }
    Ok(Subtracted {
        table: CondProbTable::from_rows_unchecked(rows),
        clamped: min_cell < -NEGATIVE_CELL_TOL,
        min_cell,
    })
}

/// Difference between two estimates in units of their combined error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub difference: f64,
    pub combined_stderr: f64,
    pub significance: f64,
}

impl Gap {
    pub fn between(later: &Estimate, earlier: &Estimate) -> Self {
        let difference = later.value - earlier.value;
        let combined_stderr = (later.stderr.powi(2) + earlier.stderr.powi(2)).sqrt();
        let significance = if combined_stderr > 0.0 {
            difference / combined_stderr
        } else if difference == 0.0 {
            0.0
        } else {
            difference.signum() * f64::INFINITY
        };
        Self {
            difference,
            combined_stderr,
            significance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub phi_degrees: f64,
    pub noise: NoiseModel,
    pub shots_pair: u64,
    pub shots_fourfold: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxTriple<T> {
    pub p1: T,
    pub p2: T,
    pub pd: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCounts {
    pub p1: CountTable,
    pub p2: CountTable,
    /// Four-fold counts including double-pair background.
    pub fourfold: CountTable,
    /// Calibration run with the second source blocked.
    pub background: CountTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaps {
    pub pd_over_p1: Gap,
    pub pd_over_p2: Gap,
    /// Gap between the distilled estimate and the larger single-box estimate.
    pub pd_over_best_single: Gap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub frames: [MeasurementFrame; 2],
    /// Noise-free CHSH values of the boxes actually emulated.
    pub true_chsh: BoxTriple<f64>,
    pub tables: BoxTriple<CondProbTable>,
    pub estimates: BoxTriple<Estimate>,
    pub signalling_residuals: BoxTriple<f64>,
    pub gaps: Gaps,
    pub counts: RawCounts,
    pub background_clamped: bool,
    pub warnings: Vec<String>,
}

fn jitter_frame<R: Rng>(
    frame: &MeasurementFrame,
    sigma: f64,
    rng: &mut R,
) -> Result<MeasurementFrame> {
    let normal = Normal::new(0.0, sigma).map_err(|_| Error::Domain {
        name: "angle_jitter_sigma",
        value: sigma,
        domain: "[0, ∞)",
    })?;
    frame.map_directions(|d| {
        // Rotation about the normal (y axis) of the measurement plane.
        let delta: f64 = normal.sample(rng);
        let (s, c) = delta.sin_cos();
        [d[0] * c + d[2] * s, d[1], -d[0] * s + d[2] * c]
    })
}

/// Runs the emulated experiment.
///
/// Two sources produce boxes from independently jittered planar frames.
/// Pair counts estimate each box. The four-fold distribution is
/// `(1 − f) · xor(P1, P2) + f · xor(P1, P1)`, the second term modelling two
/// pairs from source 1 with source 2 silent. A calibration run samples that
/// background alone and is subtracted from the observed four-fold table.
pub fn run_experiment(
    phi: PlanarAngle,
    noise: NoiseModel,
    shots_pair: u64,
    shots_fourfold: u64,
    seed: u64,
) -> Result<ExperimentReport> {
    if shots_pair == 0 || shots_fourfold == 0 {
        return Err(Error::ZeroShots);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = planar_frame(phi)?;
    let frames = [
        jitter_frame(&base, noise.angle_jitter_sigma, &mut rng)?,
        jitter_frame(&base, noise.angle_jitter_sigma, &mut rng)?,
    ];
    let p1 = singlet_box(&frames[0], noise.visibility)?;
    let p2 = singlet_box(&frames[1], noise.visibility)?;
    let pd = xor_wire(&p1, &p2)?;
    let background = xor_wire(&p1, &p1)?;
    let f = noise.background_fraction;
    let mut mixed = [[0.0; 4]; 4];
    for s in 0..4 {
        for c in 0..4 {
            mixed[s][c] = (1.0 - f) * pd.rows()[s][c] + f * background.rows()[s][c];
        }
    }
    let observed = CondProbTable::from_rows_unchecked(mixed);

    let counts = RawCounts {
        p1: sample_with(&p1, shots_pair, &mut rng)?,
        p2: sample_with(&p2, shots_pair, &mut rng)?,
        fourfold: sample_with(&observed, shots_fourfold, &mut rng)?,
        background: sample_with(&background, shots_fourfold, &mut rng)?,
    };

    let est1 = chsh_estimate(&counts.p1)?;
    let est2 = chsh_estimate(&counts.p2)?;
    let sub = subtract_background(
        &estimate_box(&counts.fourfold)?,
        &estimate_box(&counts.background)?,
        f,
    )?;
    let var_q = correlator_variances(&counts.fourfold)?;
    let var_b = correlator_variances(&counts.background)?;
    let var_d = [0, 1, 2, 3].map(|s| (var_q[s] + f * f * var_b[s]) / (1.0 - f).powi(2));
    let est_d = delta_estimate(&sub.table, &var_d)?;

    let mut warnings = Vec::new();
    if sub.clamped {
        warnings.push(format!(
            "background subtraction produced negative cells (min {:.3e}); clamped to zero and renormalized",
            sub.min_cell
        ));
    }
    let best_single = if est1.value >= est2.value { est1 } else { est2 };
    let tables = BoxTriple {
        p1: estimate_box(&counts.p1)?.with_label("P1"),
        p2: estimate_box(&counts.p2)?.with_label("P2"),
        pd: sub.table.clone().with_label("Pd"),
    };
    Ok(ExperimentReport {
        config: ExperimentConfig {
            phi_degrees: phi.degrees(),
            noise,
            shots_pair,
            shots_fourfold,
            seed,
        },
        frames,
        true_chsh: BoxTriple {
            p1: p1.chsh()?,
            p2: p2.chsh()?,
            pd: pd.chsh()?,
        },
        signalling_residuals: BoxTriple {
            p1: tables.p1.signalling_residual(),
            p2: tables.p2.signalling_residual(),
            pd: tables.pd.signalling_residual(),
        },
        tables,
        estimates: BoxTriple {
            p1: est1,
            p2: est2,
            pd: est_d,
        },
        gaps: Gaps {
            pd_over_p1: Gap::between(&est_d, &est1),
            pd_over_p2: Gap::between(&est_d, &est2),
            pd_over_best_single: Gap::between(&est_d, &best_single),
        },
        counts,
        background_clamped: sub.clamped,
        warnings,
    })
}

/// CSV and aligned-text renderings of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTables {
    /// `box,x,y,a,b,p` for the three estimated tables.
    pub cells_csv: String,
    /// `box,value,stderr,method`.
    pub estimates_csv: String,
    pub text: String,
}

/// Row-sum tolerance applied to reported tables.
pub const REPORT_ROW_TOL: f64 = 2e-2;

pub fn report_table(report: &ExperimentReport) -> Result<ReportTables> {
    if report.config.shots_pair == 0 || report.config.shots_fourfold == 0 {
        return Err(Error::ZeroShots);
    }
    let named = [
        ("P1", &report.tables.p1, &report.estimates.p1),
        ("P2", &report.tables.p2, &report.estimates.p2),
        ("Pd", &report.tables.pd, &report.estimates.pd),
    ];
    for (_, t, _) in &named {
        t.validate(REPORT_ROW_TOL)?;
    }

    let mut cells = csv::Writer::from_writer(Vec::new());
    cells.write_record(["box", "x", "y", "a", "b", "p"])?;
    let mut est = csv::Writer::from_writer(Vec::new());
    est.write_record(["box", "value", "stderr", "method"])?;
    let mut text = String::new();
    for (name, t, e) in &named {
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        cells.write_record([
                            name.to_string(),
                            x.to_string(),
                            y.to_string(),
                            a.to_string(),
                            b.to_string(),
                            t.prob(a, b, x, y).to_string(),
                        ])?;
                    }
                }
            }
        }
        est.write_record([
            name.to_string(),
            e.value.to_string(),
            e.stderr.to_string(),
            format!("{:?}", e.method),
        ])?;

        text.push_str(&format!("{name}   P(ab|xy)\n"));
        text.push_str(&format!(
            "  xy \\ ab {:>9} {:>9} {:>9} {:>9}\n",
            "00", "01", "10", "11"
        ));
        for (s, row) in t.rows().iter().enumerate() {
            text.push_str(&format!(
                "  {:>7} {:>9.5} {:>9.5} {:>9.5} {:>9.5}\n",
                PAIR_LABELS[s], row[0], row[1], row[2], row[3]
            ));
        }
        text.push_str(&format!(
            "  N({name}) = {:.4} ± {:.4}\n\n",
            e.value, e.stderr
        ));
    }
    let g = &report.gaps.pd_over_best_single;
    text.push_str(&format!(
        "N(Pd) − max(N(P1), N(P2)) = {:.4} ± {:.4}  ({:.2} σ)\n",
        g.difference, g.combined_stderr, g.significance
    ));

    let finish = |w: csv::Writer<Vec<u8>>| -> Result<String> {
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    };
    Ok(ReportTables {
        cells_csv: finish(cells)?,
        estimates_csv: finish(est)?,
        text,
    })
}

/// Per-cell standard error of an estimated probability at `shots` draws.
pub fn cell_stderr(p: f64, shots: u64) -> f64 {
    (p * (1.0 - p) / shots as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::EtaGammaParams;

    fn deterministic_box() -> CondProbTable {
        CondProbTable::new([[1.0, 0.0, 0.0, 0.0]; 4]).unwrap()
    }

    #[test]
    fn deterministic_box_counts() {
        let c = sample_counts(&deterministic_box(), 1234, 7).unwrap();
        for row in c.counts() {
            assert_eq!(row, &[1234, 0, 0, 0]);
        }
        assert_eq!(estimate_box(&c).unwrap().rows(), deterministic_box().rows());
        let e = chsh_estimate(&c).unwrap();
        assert_eq!(e.stderr, 0.0);
        let b = bootstrap_chsh(&c, 100, 1).unwrap();
        assert_eq!(b.stderr, 0.0);
        assert_eq!(b.method, EstimateMethod::Bootstrap);
    }

    #[test]
    fn white_noise_concentration() {
        let n = 1_000_000u64;
        let c = sample_counts(&CondProbTable::white_noise_box(), n, 42).unwrap();
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for row in c.counts() {
            for &v in row {
                assert!((v as f64 - 250_000.0).abs() < 5.0 * sigma);
            }
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let p = CondProbTable::from_eta_gamma(EtaGammaParams::new(0.1, 0.3).unwrap());
        assert_eq!(
            sample_counts(&p, 5000, 9).unwrap(),
            sample_counts(&p, 5000, 9).unwrap()
        );
        assert_ne!(
            sample_counts(&p, 5000, 9).unwrap(),
            sample_counts(&p, 5000, 10).unwrap()
        );
    }

    #[test]
    fn large_sample_converges() {
        let p = CondProbTable::from_eta_gamma(EtaGammaParams::new(0.019, 0.164).unwrap());
        let est = estimate_box(&sample_counts(&p, 10_000_000, 3).unwrap()).unwrap();
        for (r, s) in est.rows().iter().zip(p.rows()) {
            for (a, b) in r.iter().zip(s) {
                assert!((a - b).abs() < 2e-3);
            }
        }
    }

    #[test]
    fn count_table_validation() {
        assert_eq!(CountTable::new([[0; 4]; 4], 0), Err(Error::ZeroShots));
        assert!(matches!(
            CountTable::new([[1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0], [2, 0, 0, 0]], 1),
            Err(Error::CountMismatch { setting: "11", .. })
        ));
        assert_eq!(
            sample_counts(&CondProbTable::white_noise_box(), 0, 1),
            Err(Error::ZeroShots)
        );
        let bad: CountTable = serde_json::from_str(
            r#"{"counts":[[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]],"shots_per_setting":0}"#,
        )
        .unwrap();
        assert_eq!(chsh_estimate(&bad), Err(Error::ZeroShots));
    }

    #[test]
    fn delta_variance_matches_binomial_form() {
        // Poisson propagation reduces to (1 − C²)/N per correlator.
        let p = CondProbTable::from_eta_gamma(EtaGammaParams::new(0.1, 0.3).unwrap());
        let c = sample_counts(&p, 20_000, 5).unwrap();
        let t = estimate_box(&c).unwrap();
        let v = correlator_variances(&c).unwrap();
        for s in 0..4 {
            let corr = t.correlators().unwrap().as_array()[s];
            assert!((v[s] - (1.0 - corr * corr) / 20_000.0).abs() < 1e-15);
        }
    }

    #[test]
    fn too_few_resamples() {
        let c = sample_counts(&CondProbTable::white_noise_box(), 100, 1).unwrap();
        assert!(matches!(
            bootstrap_chsh(&c, 99, 1),
            Err(Error::TooFewResamples { .. })
        ));
    }

    #[test]
    fn background_subtraction_exact_inputs() {
        let pd = CondProbTable::from_eta_gamma(EtaGammaParams::new(0.04, 0.27).unwrap());
        let bg = CondProbTable::from_eta_gamma(EtaGammaParams::new(0.05, 0.3).unwrap());
        let f = 0.2;
        let mut mixed = [[0.0; 4]; 4];
        for (s, row) in mixed.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (1.0 - f) * pd.rows()[s][c] + f * bg.rows()[s][c];
            }
        }
        let mixed = CondProbTable::new(mixed).unwrap();
        let sub = subtract_background(&mixed, &bg, f).unwrap();
        assert!(!sub.clamped);
        for (r, s) in sub.table.rows().iter().zip(pd.rows()) {
            for (a, b) in r.iter().zip(s) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn negative_cells_are_clamped_and_flagged() {
        let observed = CondProbTable::white_noise_box();
        let bg = CondProbTable::new([[1.0, 0.0, 0.0, 0.0]; 4]).unwrap();
        let sub = subtract_background(&observed, &bg, 0.5).unwrap();
        assert!(sub.clamped);
        assert!(sub.min_cell < 0.0);
        sub.table.validate(1e-12).unwrap();
        assert!(subtract_background(&observed, &bg, 1.0).is_err());
    }

    #[test]
    fn noise_model_domain() {
        assert!(NoiseModel::new(Visibility::PERFECT, -0.1, 0.0).is_err());
        assert!(NoiseModel::new(Visibility::PERFECT, 0.0, 1.0).is_err());
        assert!(NoiseModel::new(Visibility::PERFECT, 0.01, 0.5).is_ok());
    }

    #[test]
    fn gap_significance() {
        let a = Estimate {
            value: 2.2,
            stderr: 0.03,
            method: EstimateMethod::Delta,
        };
        let b = Estimate {
            value: 2.1,
            stderr: 0.04,
            method: EstimateMethod::Delta,
        };
        let g = Gap::between(&a, &b);
        assert!((g.combined_stderr - 0.05).abs() < 1e-12);
        assert!((g.significance - 2.0).abs() < 1e-9);
    }

    #[test]
    fn jitter_zero_keeps_frame() {
        let base = planar_frame(PlanarAngle::from_degrees(15.95).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let j = jitter_frame(&base, 0.0, &mut rng).unwrap();
        for (a, b) in j.dot_products().iter().zip(base.dot_products()) {
            assert!((a - b).abs() < 1e-12);
        }
        let j = jitter_frame(&base, 0.05, &mut rng).unwrap();
        assert!(j.dot_products() != base.dot_products());
    }

    #[test]
    fn report_rendering() {
        let r = run_experiment(
            PlanarAngle::from_degrees(15.95).unwrap(),
            NoiseModel::ideal(),
            10_000,
            10_000,
            11,
        )
        .unwrap();
        let t = report_table(&r).unwrap();
        assert_eq!(t.cells_csv.lines().count(), 1 + 48);
        assert_eq!(t.estimates_csv.lines().count(), 4);
        for line in t.cells_csv.lines().skip(1) {
            let p: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(t.text.contains("N(Pd) = "));
        let mut zero = r.clone();
        zero.config.shots_fourfold = 0;
        assert_eq!(report_table(&zero), Err(Error::ZeroShots));
    }

    #[test]
    fn zero_shot_experiment_rejected() {
        let phi = PlanarAngle::from_degrees(15.95).unwrap();
        assert_eq!(
            run_experiment(phi, NoiseModel::ideal(), 0, 10, 1).unwrap_err(),
            Error::ZeroShots
        );
    }

    #[test]
    fn ideal_experiment_targets() {
        let phi = PlanarAngle::from_degrees(15.95).unwrap();
        let r = run_experiment(phi, NoiseModel::ideal(), 10_000_000, 10_000_000, 5).unwrap();
        let (e1, ed) = (r.estimates.p1, r.estimates.pd);
        // Closed forms at φ: 3cos φ − cos 3φ and 3cos²φ − cos²3φ.
        let (c1, c3) = (phi.radians().cos(), (3.0 * phi.radians()).cos());
        assert!((r.true_chsh.p1 - (3.0 * c1 - c3)).abs() < 1e-12);
        assert!((r.true_chsh.pd - (3.0 * c1 * c1 - c3 * c3)).abs() < 1e-12);
        assert!((r.true_chsh.p1 - 2.214).abs() < 1e-3);
        assert!((r.true_chsh.pd - 2.325).abs() < 2e-3);
        assert!((e1.value - r.true_chsh.p1).abs() < 3.0 * e1.stderr);
        assert!((ed.value - r.true_chsh.pd).abs() < 3.0 * ed.stderr);
        assert!(ed.value > e1.value && ed.value > r.estimates.p2.value);
    }

    #[test]
    fn zero_visibility_shows_no_nonlocality() {
        let phi = PlanarAngle::from_degrees(15.95).unwrap();
        let noise = NoiseModel::new(Visibility::new(0.0).unwrap(), 0.0, 0.1).unwrap();
        let r = run_experiment(phi, noise, 100_000, 100_000, 8).unwrap();
        for e in [r.estimates.p1, r.estimates.p2, r.estimates.pd] {
            assert!(e.value < 5.0 * e.stderr, "{e:?}");
        }
    }

    #[test]
    fn cell_stderr_values() {
        assert_eq!(cell_stderr(0.0, 100), 0.0);
        assert!((cell_stderr(0.5, 100) - 0.05).abs() < 1e-15);
    }
}
