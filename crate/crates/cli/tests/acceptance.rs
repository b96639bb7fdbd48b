//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails.
//!
//! Run with `cargo test -p nlbox-cli --test acceptance`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::process::{Command, ExitCode};
use std::time::Instant;

use nlbox_core::boxes::pair_index;
use nlbox_core::quantum::visibility_for_chsh;
use nlbox_core::{
    bootstrap_chsh, chsh_estimate, gain, planar_frame, run_experiment, sample_counts, singlet_box,
    tlm_feasible, tlm_slack, xor_wire, CondProbTable, CorrelationVector, EtaGammaParams,
    MeasurementFrame, NoiseModel, PlanarAngle, Visibility, TSIRELSON_BOUND,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn nlbox(args: &[&str]) -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_nlbox"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o.stdout
}

fn optimum_matches_reference() -> Outcome {
    let start = Instant::now();
    let raw = nlbox(&[
        "--format",
        "json",
        "optimize",
        "--mode",
        "both",
        "--resolution",
        "2000",
    ]);
    let secs = start.elapsed().as_secs_f64();
    let v: Value = serde_json::from_slice(&raw).unwrap();
    let num = |p: &Value| p.as_f64().unwrap();
    let b = &v["boundary"];
    let g = &v["grid"];
    let (eta, gamma, gn) = (
        num(&b["params"]["eta"]),
        num(&b["params"]["gamma"]),
        num(&b["gain"]),
    );
    let phi = num(&b["phi_degrees"]);
    let (geta, ggamma, ggain) = (
        num(&g["params"]["eta"]),
        num(&g["params"]["gamma"]),
        num(&g["gain"]),
    );
    let pass = within(eta, 0.019, 0.002)
        && within(gamma, 0.164, 0.003)
        && within(gn, 0.110, 0.002)
        && within(phi, 15.95, 0.1)
        && within(geta, 0.019, 0.002)
        && within(ggamma, 0.164, 0.003)
        && within(ggain, 0.110, 0.002)
        && secs < 60.0;
    outcome(
        pass,
        format!(
            "boundary eta={eta:.6} gamma={gamma:.6} gain={gn:.6} phi={phi:.4}deg; \
             grid eta={geta:.6} gamma={ggamma:.6} gain={ggain:.6}; {secs:.2}s"
        ),
    )
}

fn family(eta: f64, gamma: f64) -> CondProbTable {
    CondProbTable::from_eta_gamma(EtaGammaParams::new(eta, gamma).unwrap())
}

fn distillation_numbers() -> Outcome {
    let p = family(0.019, 0.164);
    let n = p.chsh().unwrap();
    let nd = xor_wire(&p, &p).unwrap().chsh().unwrap();

    // Unequal parameters against the closed form v1 + v2 − 2 v1 v2.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (e1, e2) = (rng.random_range(0.001..0.15), rng.random_range(0.001..0.15));
        let (g1, g2) = (
            rng.random_range(3.0 * e1..0.5),
            rng.random_range(3.0 * e2..0.5),
        );
        let wired = xor_wire(&family(e1, g1), &family(e2, g2)).unwrap();
        let mix = |a: f64, b: f64| a + b - 2.0 * a * b;
        let want = family(mix(e1, e2), mix(g1, g2));
        for (r, s) in wired.rows().iter().zip(want.rows()) {
            for (a, b) in r.iter().zip(s) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let pass = within(n, 2.214, 0.001) && within(nd, 2.3247, 0.001) && worst <= 1e-12;
    outcome(
        pass,
        format!("N(P)={n:.6} N(Pd)={nd:.6} max wiring deviation={worst:.2e}"),
    )
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..1.0);
    let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    [r * az.cos(), r * az.sin(), z]
}

fn bounds() -> Outcome {
    let pr = CondProbTable::pr_box().chsh().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut max_singlet: f64 = 0.0;
    for _ in 0..10_000 {
        let f = MeasurementFrame::new(
            random_unit(&mut rng),
            random_unit(&mut rng),
            random_unit(&mut rng),
            random_unit(&mut rng),
        )
        .unwrap();
        let n = singlet_box(&f, Visibility::PERFECT)
            .unwrap()
            .chsh()
            .unwrap();
        max_singlet = max_singlet.max(n);
    }
    // Tsirelson point: magnitude 1/√2 everywhere, minus sign on the (1,1) slot.
    let c = CorrelationVector::new([FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2, -FRAC_1_SQRT_2])
        .unwrap();
    let constrained =
        c.get(0, 0).asin() + c.get(0, 1).asin() + c.get(1, 0).asin() - c.get(1, 1).asin();
    let feasible = tlm_feasible(&c, 1e-9);
    let slack = tlm_slack(&c);
    let pass = pr == 4.0
        && max_singlet <= TSIRELSON_BOUND + 1e-9
        && feasible
        && within(constrained, PI, 1e-9)
        && within(slack, 0.0, 1e-9);
    outcome(
        pass,
        format!(
            "N(PR)={pr} max singlet N over 1e4 frames={max_singlet:.12} (2√2={:.12}); \
             Tsirelson sum-π={:.1e} feasible={feasible}",
            2.0 * SQRT_2,
            constrained - PI
        ),
    )
}

/// Vertices of the non-signalling polytope: 16 deterministic boxes and 8
/// PR-type boxes.
fn ns_vertices() -> Vec<[[f64; 4]; 4]> {
    let mut out = Vec::new();
    for f in 0..4usize {
        for g in 0..4usize {
            let mut p = [[0.0; 4]; 4];
            for x in 0..2 {
                for y in 0..2 {
                    p[pair_index(x, y)][pair_index(f >> x & 1, g >> y & 1)] = 1.0;
                }
            }
            out.push(p);
        }
    }
    for k in 0..8usize {
        let (al, be, ga) = (k & 1, k >> 1 & 1, k >> 2 & 1);
        let mut p = [[0.0; 4]; 4];
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        if a ^ b == (x & y) ^ (al & x) ^ (be & y) ^ ga {
                            p[pair_index(x, y)][pair_index(a, b)] = 0.5;
                        }
                    }
                }
            }
        }
        out.push(p);
    }
    out
}

fn random_ns_box(rng: &mut ChaCha8Rng, vertices: &[[[f64; 4]; 4]]) -> CondProbTable {
    // Exponential weights give a uniform draw on the simplex of mixtures.
    let w: Vec<f64> = (0..vertices.len())
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let total: f64 = w.iter().sum();
    let mut p = [[0.0; 4]; 4];
    for (wk, v) in w.iter().zip(vertices) {
        for s in 0..4 {
            for c in 0..4 {
                p[s][c] += wk / total * v[s][c];
            }
        }
    }
    CondProbTable::new(p).unwrap()
}

fn wiring_structure() -> Outcome {
    let vertices = ns_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut norm, mut signalling, mut asym): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let p = random_ns_box(&mut rng, &vertices);
        let q = random_ns_box(&mut rng, &vertices);
        let pq = xor_wire(&p, &q).unwrap();
        let qp = xor_wire(&q, &p).unwrap();
        for (r, s) in pq.rows().iter().zip(qp.rows()) {
            norm = norm.max((r.iter().sum::<f64>() - 1.0).abs());
            for (a, b) in r.iter().zip(s) {
                asym = asym.max((a - b).abs());
            }
        }
        signalling = signalling.max(pq.signalling_residual());
    }
    let pass = norm <= 1e-12 && signalling <= 1e-12 && asym <= 1e-12;
    outcome(
        pass,
        format!(
            "1000 pairs: row-sum error={norm:.1e} signalling={signalling:.1e} asymmetry={asym:.1e}"
        ),
    )
}

fn necessary_condition_scan() -> Outcome {
    let n = 500;
    let (mut positive, mut violations) = (0usize, 0usize);
    for i in 0..n {
        let eta = (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let gamma = (j as f64 + 0.5) / n as f64;
            if gamma <= 3.0 * eta {
                continue;
            }
            if gain(EtaGammaParams::new(eta, gamma).unwrap()) > 0.0 {
                positive += 1;
                if !(0.0 < eta && eta < gamma / 3.0 && gamma / 3.0 < 1.0 / 6.0) {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0 && positive > 0,
        format!(
            "{positive} nonlocal points with positive gain, {violations} outside 0<eta<gamma/3<1/6"
        ),
    )
}

fn experiment_emulation() -> Outcome {
    let start = Instant::now();
    let phi = PlanarAngle::from_degrees(15.95).unwrap();
    let vis = visibility_for_chsh(phi, 2.14).unwrap();
    let noise = NoiseModel::new(vis, 0.0, 0.1).unwrap();
    let r = run_experiment(phi, noise, 1_000_000, 100_000, 1).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let e = &r.estimates;
    let (g1, g2) = (&r.gaps.pd_over_p1, &r.gaps.pd_over_p2);
    let pass = g1.significance > 3.0 && g2.significance > 3.0 && secs < 30.0;
    outcome(
        pass,
        format!(
            "v={:.4} N(P1)={:.4}±{:.4} N(P2)={:.4}±{:.4} N(Pd)={:.4}±{:.4}; gaps {:.2}σ, {:.2}σ; {secs:.2}s",
            vis.value(),
            e.p1.value,
            e.p1.stderr,
            e.p2.value,
            e.p2.stderr,
            e.pd.value,
            e.pd.stderr,
            g1.significance,
            g2.significance
        ),
    )
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn error_bar_calibration() -> Outcome {
    let phi = PlanarAngle::from_degrees(15.95).unwrap();
    let p = singlet_box(&planar_frame(phi).unwrap(), Visibility::PERFECT).unwrap();
    let shots = 10_000;
    let (values, errs): (Vec<f64>, Vec<f64>) = (0..100u64)
        .map(|seed| {
            let e = chsh_estimate(&sample_counts(&p, shots, seed).unwrap()).unwrap();
            (e.value, e.stderr)
        })
        .unzip();
    let (_, empirical) = mean_sd(&values);
    let (reported, _) = mean_sd(&errs);
    let vs_empirical = (reported - empirical).abs() / empirical;

    let mut worst_boot: f64 = 0.0;
    for (k, (eta, gamma)) in [(0.0193, 0.1645), (0.05, 0.3), (0.01, 0.45), (0.1, 0.35)]
        .into_iter()
        .enumerate()
    {
        let counts = sample_counts(&family(eta, gamma), shots, 500 + k as u64).unwrap();
        let d = chsh_estimate(&counts).unwrap();
        let b = bootstrap_chsh(&counts, 1000, 900 + k as u64).unwrap();
        worst_boot = worst_boot.max((d.stderr - b.stderr).abs() / b.stderr);
    }
    let pass = vs_empirical < 0.25 && worst_boot < 0.20;
    outcome(
        pass,
        format!(
            "delta {reported:.5} vs empirical SD {empirical:.5} ({:.1}%); worst delta/bootstrap gap {:.1}%",
            100.0 * vs_empirical,
            100.0 * worst_boot
        ),
    )
}

fn cli_determinism() -> Outcome {
    let runs: [&[&str]; 4] = [
        &["--format", "json", "eval", "--phi", "15.95"],
        &[
            "--format",
            "json",
            "distill",
            "--eta",
            "0.019",
            "--gamma",
            "0.164",
            "--iterations",
            "4",
        ],
        &["--format", "json", "optimize", "--resolution", "300"],
        &[
            "--format",
            "json",
            "--seed",
            "42",
            "simulate",
            "--background",
            "0.1",
            "--jitter",
            "0.5",
            "--shots-pair",
            "50000",
            "--shots-fourfold",
            "20000",
        ],
    ];
    let mut identical = 0;
    for args in runs {
        if nlbox(args) == nlbox(args) {
            identical += 1;
        }
    }
    outcome(
        identical == runs.len(),
        format!(
            "{identical}/{} commands byte-identical on repeat",
            runs.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "optimum of the gain over attainable boxes",
            optimum_matches_reference,
        ),
        ("distillation of the optimal box", distillation_numbers),
        ("local, quantum and algebraic bounds", bounds),
        (
            "wiring preserves normalization, no-signalling and symmetry",
            wiring_structure,
        ),
        (
            "positive gain only inside 0<eta<gamma/3<1/6",
            necessary_condition_scan,
        ),
        (
            "emulated experiment resolves the gain",
            experiment_emulation,
        ),
        ("error bars are calibrated", error_bar_calibration),
        ("CLI output is deterministic", cli_determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {}: {name} ({})", k + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
