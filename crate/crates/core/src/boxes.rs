//! Binary-input / binary-output correlation boxes.
//!
//! A box is stored as the 4×4 table `P(ab|xy)`: rows are the setting pairs
//! `(x, y)` in the order 00, 01, 10, 11 and columns the outcome pairs `(a, b)`
//! in the same order. Every serialized form uses this layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{tlm_feasible, CorrelationVector};

/// Default tolerance for normalization and non-signalling checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Local hidden-variable bound on the CHSH value.
pub const LOCAL_BOUND: f64 = 2.0;

/// Tsirelson bound, `2√2`.
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Labels for the four pairs in row/column order.
pub const PAIR_LABELS: [&str; 4] = ["00", "01", "10", "11"];

/// Row/column index of the bit pair `(first, second)`.
#[inline]
pub fn pair_index(first: usize, second: usize) -> usize {
    2 * first + second
}

fn check_bit(b: usize) -> Result<usize> {
    if b > 1 {
        Err(Error::InvalidBit(b))
    } else {
        Ok(b)
    }
}

/// Conditional probability table `P(ab|xy)`.
///
/// Non-signalling is not enforced; a signalling table is representable and
/// [`CondProbTable::classify`] reports it. Construction through
/// [`CondProbTable::new`] checks positivity and row normalization, while
/// deserialized tables are checked lazily by every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondProbTable {
    p: [[f64; 4]; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

/// The `(η, γ)` parameters of the symmetric box family: rows 00, 01 and 10
/// are `((1−η)/2, η/2, η/2, (1−η)/2)` and row 11 uses `γ` in place of `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaGammaParams {
    eta: f64,
    gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoxClass {
    Invalid,
    Signalling,
    Local,
    QuantumCompatible,
    SuperQuantumNonSignalling,
}

impl std::fmt::Display for BoxClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BoxClass::Invalid => "Invalid",
            BoxClass::Signalling => "Signalling",
            BoxClass::Local => "Local",
            BoxClass::QuantumCompatible => "QuantumCompatible",
            BoxClass::SuperQuantumNonSignalling => "SuperQuantumNonSignalling",
        };
        f.write_str(s)
    }
}

/// Marginal distributions per setting pair: `alice[(x,y)][a] = Σ_b P(ab|xy)`
/// and `bob[(x,y)][b] = Σ_a P(ab|xy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Marginals {
    pub alice: [[f64; 2]; 4],
    pub bob: [[f64; 2]; 4],
}

/// CHSH value together with the setting pair that places the minus sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshTerm {
    pub value: f64,
    /// Row index of the minus-signed correlator, `(1−x, 1−y)` in pair order.
    pub minus: usize,
    /// Sign of the combination before taking the absolute value.
    pub sign: f64,
}

impl ChshTerm {
    /// Coefficient of correlator `C_xy` (indexed by pair order) in the active
    /// CHSH combination, including the outer absolute-value sign.
    pub fn coefficient(&self, pair: usize) -> f64 {
        if pair == self.minus {
            -self.sign
        } else {
            self.sign
        }
    }
}

impl EtaGammaParams {
    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        let open_unit = |name, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Domain {
                    name,
                    value: v,
                    domain: "(0, 1)",
                })
            }
        };
        open_unit("eta", eta)?;
        open_unit("gamma", gamma)?;
        Ok(Self { eta, gamma })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// CHSH value of the family box, `2 + 2γ − 6η` (valid on the nonlocal
    /// branch `γ ≥ 3η`; use [`CondProbTable::chsh`] elsewhere).
    pub fn nonlocality(&self) -> f64 {
        2.0 + 2.0 * self.gamma - 6.0 * self.eta
    }

    /// Correlators `(1−2η, 1−2η, 1−2η, 1−2γ)`.
    pub fn correlators(&self) -> CorrelationVector {
        let c = 1.0 - 2.0 * self.eta;
        CorrelationVector::from_array_unchecked([c, c, c, 1.0 - 2.0 * self.gamma])
    }
}

impl CondProbTable {
    /// Builds a table, checking positivity and normalization at
    /// [`DEFAULT_TOL`].
    pub fn new(p: [[f64; 4]; 4]) -> Result<Self> {
        let t = Self::from_rows_unchecked(p);
        t.validate(DEFAULT_TOL)?;
        Ok(t)
    }

    pub fn from_rows_unchecked(p: [[f64; 4]; 4]) -> Self {
        Self { p, label: None }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.p
    }

    /// `P(ab|xy)`.
    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[pair_index(x, y)][pair_index(a, b)]
    }

    /// Checks that every entry lies in `[0, 1]` and every row sums to 1,
    /// both within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for (r, row) in self.p.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < -tol || v > 1.0 + tol {
                    return Err(Error::NotAProbability {
                        setting: PAIR_LABELS[r],
                        outcome: PAIR_LABELS[c],
                        value: v,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::NotNormalized {
                    setting: PAIR_LABELS[r],
                    sum,
                });
            }
        }
        Ok(())
    }

    fn row_correlation(row: &[f64; 4]) -> f64 {
        row[0] + row[3] - row[1] - row[2]
    }

    /// `C_xy = P(00|xy) + P(11|xy) − P(01|xy) − P(10|xy)`.
    pub fn correlation(&self, x: usize, y: usize) -> Result<f64> {
        let (x, y) = (check_bit(x)?, check_bit(y)?);
        self.validate(DEFAULT_TOL)?;
        Ok(Self::row_correlation(&self.p[pair_index(x, y)]))
    }

    /// All four correlators in pair order.
    pub fn correlators(&self) -> Result<CorrelationVector> {
        self.validate(DEFAULT_TOL)?;
        Ok(self.correlators_unvalidated())
    }

    fn correlators_unvalidated(&self) -> CorrelationVector {
        let c = self.p.map(|row| Self::row_correlation(&row));
        CorrelationVector::clamped(c)
    }

    /// CHSH nonlocality: the maximum over `(x, y)` of
    /// `|C_xy + C_xȳ + C_x̄y − C_x̄ȳ|`. Covers all eight sign variants.
    pub fn chsh(&self) -> Result<f64> {
        Ok(self.chsh_term()?.value)
    }

    /// Like [`CondProbTable::chsh`], also reporting which variant is active.
    /// Ties resolve to the first maximizing pair in row order.
    pub fn chsh_term(&self) -> Result<ChshTerm> {
        self.validate(DEFAULT_TOL)?;
        Ok(chsh_of_correlators(&self.correlators_unvalidated().0))
    }

    pub fn marginals(&self) -> Result<Marginals> {
        self.validate(DEFAULT_TOL)?;
        Ok(self.marginals_unvalidated())
    }

    fn marginals_unvalidated(&self) -> Marginals {
        let mut alice = [[0.0; 2]; 4];
        let mut bob = [[0.0; 2]; 4];
        for (s, row) in self.p.iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    let v = row[pair_index(a, b)];
                    alice[s][a] += v;
                    bob[s][b] += v;
                }
            }
        }
        Marginals { alice, bob }
    }

    /// Largest change of either party's marginal under the other party's
    /// setting choice. Zero for a non-signalling table.
    pub fn signalling_residual(&self) -> f64 {
        let m = self.marginals_unvalidated();
        let mut worst: f64 = 0.0;
        for x in 0..2 {
            // Alice, fixed x, y varies.
            let (s0, s1) = (pair_index(x, 0), pair_index(x, 1));
            worst = worst.max((m.alice[s0][0] - m.alice[s1][0]).abs());
            worst = worst.max((m.alice[s0][1] - m.alice[s1][1]).abs());
        }
        for y in 0..2 {
            let (s0, s1) = (pair_index(0, y), pair_index(1, y));
            worst = worst.max((m.bob[s0][0] - m.bob[s1][0]).abs());
            worst = worst.max((m.bob[s0][1] - m.bob[s1][1]).abs());
        }
        worst
    }

    pub fn is_nonsignalling(&self, tol: f64) -> bool {
        self.signalling_residual() <= tol
    }

    /// Classifies the table.
    ///
    /// Locality is decided by the CHSH family alone. For two inputs and two
    /// outputs, positivity, non-signalling and the eight CHSH inequalities
    /// are taken as the complete facet description of the local polytope, so
    /// no linear program is solved. Quantum compatibility additionally
    /// requires the arcsine criterion on the correlators.
    pub fn classify(&self, tol: f64) -> BoxClass {
        if self.validate(tol).is_err() {
            return BoxClass::Invalid;
        }
        if !self.is_nonsignalling(tol) {
            return BoxClass::Signalling;
        }
        let corr = self.correlators_unvalidated();
        let n = chsh_of_correlators(&corr.0).value;
        if n <= LOCAL_BOUND + tol {
            BoxClass::Local
        } else if n <= TSIRELSON_BOUND + tol && tlm_feasible(&corr, tol) {
            BoxClass::QuantumCompatible
        } else {
            BoxClass::SuperQuantumNonSignalling
        }
    }

    pub fn from_eta_gamma(params: EtaGammaParams) -> Self {
        let row = |v: f64| [(1.0 - v) / 2.0, v / 2.0, v / 2.0, (1.0 - v) / 2.0];
        let eta = row(params.eta);
        Self::from_rows_unchecked([eta, eta, eta, row(params.gamma)])
    }

    /// Inverse of [`CondProbTable::from_eta_gamma`]. Returns `None` when the
    /// table is not a member of the family within `tol`.
    pub fn eta_gamma_of(&self, tol: f64) -> Option<EtaGammaParams> {
        let read = |row: &[f64; 4]| -> Option<f64> {
            // Both off-diagonal cells hold v/2, both diagonal cells (1−v)/2.
            let v = row[1] + row[2];
            let expect = [(1.0 - v) / 2.0, v / 2.0, v / 2.0, (1.0 - v) / 2.0];
            row.iter()
                .zip(expect.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
                .then_some(v)
        };
        let etas = [read(&self.p[0])?, read(&self.p[1])?, read(&self.p[2])?];
        let gamma = read(&self.p[3])?;
        let eta = etas[0];
        if etas.iter().any(|e| (e - eta).abs() > tol) {
            return None;
        }
        EtaGammaParams::new(eta, gamma).ok()
    }

    /// The PR box: `a ⊕ b = x·y` with uniform marginals.
    pub fn pr_box() -> Self {
        let corr = [0.5, 0.0, 0.0, 0.5];
        let anti = [0.0, 0.5, 0.5, 0.0];
        Self::from_rows_unchecked([corr, corr, corr, anti]).with_label("PR box")
    }

    pub fn white_noise_box() -> Self {
        Self::from_rows_unchecked([[0.25; 4]; 4]).with_label("white noise")
    }

    /// Sixteen records `x,y,a,b,p` in table order, with a header line.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "y", "a", "b", "p"])?;
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        w.write_record([
                            x.to_string(),
                            y.to_string(),
                            a.to_string(),
                            b.to_string(),
                            self.prob(a, b, x, y).to_string(),
                        ])?;
                    }
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }
}

/// CHSH value from correlators in pair order.
pub(crate) fn chsh_of_correlators(c: &[f64; 4]) -> ChshTerm {
    let mut best = ChshTerm {
        value: f64::NEG_INFINITY,
        minus: 3,
        sign: 1.0,
    };
    for x in 0..2 {
        for y in 0..2 {
            let minus = pair_index(1 - x, 1 - y);
            let s =
                c[pair_index(x, y)] + c[pair_index(x, 1 - y)] + c[pair_index(1 - x, y)] - c[minus];
            if s.abs() > best.value {
                best = ChshTerm {
                    value: s.abs(),
                    minus,
                    sign: if s < 0.0 { -1.0 } else { 1.0 },
                };
            }
        }
    }
    best
}
