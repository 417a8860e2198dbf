//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::HashSet;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use embedguide::analysis::{compression_eigenvalues, one_rdm};
use embedguide::embedding::{dmet_effective, embed_solve, schmidt_bath, SCHMIDT_TOL};
use embedguide::fock::{apply_hamiltonian, enumerate_sector, WaveFunction, DEFAULT_MAX_DIM};
use embedguide::harness::tasks::{run_ensemble, EnsembleMember, EnsembleSpec};
use embedguide::harness::{self, builtin, ExperimentConfig, LoadedModel, BUILTIN_NAMES};
use embedguide::impurity::{b_frame_ground_state, particle_hole};
use embedguide::linalg::{random_isometry, to_complex};
use embedguide::meanfield::{hartree_fock, MeanFieldOptions};
use embedguide::model::{build_oligomer, random_model, Coupling, MolecularIntegrals};
use embedguide::operator::one_rdm_over;
use embedguide::qpecost::{guiding_gate_counts, qpe_cost, GateParams, GuidingKind, QpeMode};
use embedguide::solver::{
    dense_ground_state, dense_matrix, dense_spectrum, expectation, ground_state, SolverOptions, DENSE_MAX_DIM,
};
use embedguide::states::{determinant_to_wavefunction, mps_compress, sum_of_slater};

const SHIPPED: [&str; 3] = ["impurity8", "random6", "hubbard8"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn shipped() -> Vec<LoadedModel> {
    SHIPPED.iter().map(|n| builtin(n).unwrap()).collect()
}

fn ensemble_spec() -> EnsembleSpec {
    EnsembleSpec {
        count: 20,
        n_modes: 10,
        m: 2,
        n_electrons: 5,
        gap: 0.2,
        seed: 1000,
        k_values: vec![4, 6],
        magnitude: 0.5,
    }
}

fn lemma(members: &[EnsembleMember], seconds: f64) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut bad = Vec::new();
    for m in members {
        if m.omega < 0.2 - 1e-12 {
            bad.push(format!("seed {} has gap {}", m.seed, m.omega));
        }
        for r in &m.rows {
            let slack = r.achieved_overlap - (1.0 - r.delta_bound);
            worst = worst.min(slack);
            if slack < 0.0 {
                bad.push(format!("seed {} K={} slack {slack:.3e}", m.seed, r.k));
            }
        }
    }
    let pass = bad.is_empty() && seconds < 120.0 && members.len() == 20;
    outcome(
        pass,
        format!(
            "{} instances, min(achieved - (1 - delta)) = {worst:.3e}, {seconds:.1}s{}",
            members.len(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join(", ")) }
        ),
    )
}

fn embedding_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in shipped() {
        let mf = hartree_fock(&m.integrals, m.n_electrons, &MeanFieldOptions::default()).unwrap();
        let part = schmidt_bath(&mf.determinant, &[0, 1], SCHMIDT_TOL).unwrap();
        let prob = dmet_effective(&m.integrals, &part).unwrap();
        let basis = enumerate_sector(prob.n_active_modes(), prob.n_active, DEFAULT_MAX_DIM).unwrap();
        for _ in 0..50 {
            let phi = WaveFunction::random(basis.clone(), &mut rng);
            let full = prob.embed_state(&phi).unwrap();
            let lhs = expectation(&m.integrals, &full).unwrap();
            let rhs = expectation(&prob.effective, &phi).unwrap() + prob.env_energy;
            worst = worst.max((lhs - rhs).abs());
            count += 1;
        }
    }
    outcome(worst <= 1e-10, format!("{count} states, max |difference| = {worst:.3e}"))
}

fn trivial_embedding() -> Outcome {
    let opts = SolverOptions::default();
    let mut worst_full = 0.0f64;
    let mut worst_var = f64::INFINITY;
    let mut fragments = 0;
    for name in BUILTIN_NAMES {
        let m = builtin(name).unwrap();
        let n = m.integrals.n_modes();
        let e_fci = dense_spectrum(&m.integrals, m.n_electrons).unwrap()[0];
        let mf = hartree_fock(&m.integrals, m.n_electrons, &MeanFieldOptions::default()).unwrap();
        for mask in 1u32..(1 << n) {
            let frag: Vec<usize> = (0..n).filter(|p| mask >> p & 1 == 1).collect();
            let part = schmidt_bath(&mf.determinant, &frag, SCHMIDT_TOL).unwrap();
            let prob = dmet_effective(&m.integrals, &part).unwrap();
            let e = embed_solve(&prob, &opts).unwrap().e_total;
            if frag.len() == n {
                worst_full = worst_full.max((e - e_fci).abs());
            } else {
                worst_var = worst_var.min(e - e_fci);
                fragments += 1;
            }
        }
    }
    outcome(
        worst_full <= 1e-10 && worst_var >= -1e-10,
        format!(
            "full fragment max |E - E_FCI| = {worst_full:.3e}; {fragments} proper fragments, min(E - E_FCI) = {worst_var:.3e}"
        ),
    )
}

fn oligomer_product(report: &harness::RunReport) -> Outcome {
    let decoupled = report.table("09_oligomer.csv").expect("oligomer table");
    let coupled = report.table("10_oligomer.csv").expect("oligomer table");
    let dev0 = decoupled.f64_column("deviation").unwrap();
    let dev1 = coupled.f64_column("deviation").unwrap();
    let ks = decoupled.f64_column("k").unwrap();
    let modes = decoupled.f64_column("n_modes").unwrap();
    // independent check of the k = 1 entry against a direct overlap
    let mono = builtin("dimer4").unwrap();
    let mf = hartree_fock(&mono.integrals, mono.n_electrons, &MeanFieldOptions::default()).unwrap();
    let hf = determinant_to_wavefunction(&mf.determinant, DEFAULT_MAX_DIM).unwrap();
    let (_, gs) = dense_ground_state(&mono.integrals, mono.n_electrons).unwrap();
    let eta1 = hf.inner(&gs).unwrap().norm();
    let eta_col = decoupled.f64_column("overlap").unwrap();
    let law_ok = eta_col.iter().zip(&ks).all(|(e, k)| (e - eta1.powi(*k as i32)).abs() <= 1e-9);
    let max0 = dev0.iter().cloned().fold(0.0, f64::max);
    let max1 = dev1.iter().cloned().fold(0.0, f64::max);
    let pass = law_ok && max0 <= 1e-9 && max1 <= 0.05 && ks == [1.0, 2.0, 3.0, 4.0] && modes[3] == 16.0;
    outcome(
        pass,
        format!("eta_1 = {eta1:.12}; uncoupled max deviation {max0:.3e}; coupling 0.05 max deviation {max1:.3e}"),
    )
}

fn sos_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut last_one = 0.0f64;
    for m in shipped() {
        let (_, psi) = dense_ground_state(&m.integrals, m.n_electrons).unwrap();
        let mut mags: Vec<f64> = psi.coeffs().iter().map(|c| c.norm_sqr()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let dim = psi.dim();
        let mut prev = 0.0;
        let mut cum = 0.0;
        for l in 1..=dim {
            cum += mags[l - 1];
            let s = sum_of_slater(&psi, l).unwrap();
            let ov = s.to_wavefunction(psi.basis()).unwrap().inner(&psi).unwrap().norm();
            worst = worst.max((ov - cum.sqrt()).abs());
            if ov < prev - 1e-12 {
                monotone = false;
            }
            prev = ov;
        }
        last_one = last_one.max((prev - 1.0).abs());
    }
    outcome(
        worst <= 1e-12 && monotone && last_one <= 1e-12,
        format!("max |overlap - sqrt(captured)| = {worst:.3e}, monotone = {monotone}, |overlap(dim) - 1| = {last_one:.3e}"),
    )
}

fn mps_curves() -> Outcome {
    let mut lossless = 0.0f64;
    let mut worst_drop = 0.0f64;
    for m in shipped() {
        let (_, psi) = dense_ground_state(&m.integrals, m.n_electrons).unwrap();
        let n = m.integrals.n_modes();
        let full_d = 1usize << (n / 2);
        let mut prev = 0.0;
        for d in 1..=full_d {
            let ov = mps_compress(&psi, d).unwrap().overlap(&psi).unwrap().norm();
            worst_drop = worst_drop.max(prev - ov);
            prev = ov;
        }
        lossless = lossless.max((prev - 1.0).abs());
    }
    outcome(
        lossless <= 1e-10 && worst_drop <= 1e-8,
        format!("lossless |overlap - 1| = {lossless:.3e}, largest decrease in D = {worst_drop:.3e}"),
    )
}

fn rdm_suite() -> Outcome {
    let mut spec_err = 0.0f64;
    let mut trace_err = 0.0f64;
    let mut idem = 0.0f64;
    let mut ph_err = 0.0f64;
    let mut interlace = f64::NEG_INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut states = Vec::new();
    for m in shipped() {
        let (_, psi) = dense_ground_state(&m.integrals, m.n_electrons).unwrap();
        states.push(psi.clone());
        states.push(WaveFunction::random(psi.basis().clone(), &mut rng));
        let mf = hartree_fock(&m.integrals, m.n_electrons, &MeanFieldOptions::default()).unwrap();
        let det = determinant_to_wavefunction(&mf.determinant, DEFAULT_MAX_DIM).unwrap();
        idem = idem.max(one_rdm(&det).unwrap().idempotency_error());
    }
    for psi in &states {
        let rdm = one_rdm(psi).unwrap();
        let ev = rdm.eigenvalues();
        for &x in &ev {
            spec_err = spec_err.max(-x).max(x - 1.0);
        }
        trace_err = trace_err.max((rdm.trace() - psi.n_electrons() as f64).abs());
        let n = rdm.n_modes();
        let mut sigma = ev.clone();
        sigma.reverse();
        for k in 1..n {
            let l = random_isometry(n, k, &mut rng);
            let mu = compression_eigenvalues(&rdm, &l);
            for j in 0..k {
                interlace = interlace.max(mu[j] - sigma[j]);
                interlace = interlace.max(sigma[j + n - k] - mu[j]);
            }
        }
    }
    for name in ["impurity8", "impurity8_neargapless"] {
        let m = builtin(name).unwrap();
        let imp = m.impurity.as_ref().unwrap();
        let (_, psi) = dense_ground_state(&m.integrals, m.n_electrons).unwrap();
        let frame = particle_hole(imp, m.n_electrons).unwrap();
        let via_relation = frame.b_frame_rdm(&one_rdm(&psi).unwrap());
        let (_, b_states, b_coeffs) = b_frame_ground_state(&frame).unwrap();
        let direct = one_rdm_over(&b_states, &b_coeffs, frame.n_modes);
        ph_err = ph_err.max((via_relation - direct).amax());
    }
    outcome(
        spec_err <= 1e-10 && trace_err <= 1e-10 && idem <= 1e-9 && ph_err <= 1e-12 && interlace <= 1e-10,
        format!(
            "eigenvalue excursion {spec_err:.3e}, trace error {trace_err:.3e}, determinant idempotency {idem:.3e}, particle-hole relation {ph_err:.3e}, interlacing violation {interlace:.3e}"
        ),
    )
}

fn theorem3(members: &[EnsembleMember]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut rows = 0;
    let mut exc_ok = true;
    for m in members {
        for r in &m.rows {
            exc_ok &= r.k_exc <= r.k;
            worst = worst.min(r.mixed_overlap - r.theorem3_bound);
            rows += 1;
        }
    }
    outcome(
        worst >= -1e-12 && exc_ok,
        format!("{rows} (instance, K) pairs, min(mixed - overlap^2 / dim V) = {worst:.3e}, K_exc <= K: {exc_ok}"),
    )
}

fn oracle_equivalence(members: &[EnsembleMember]) -> Outcome {
    let opts = SolverOptions::default();
    let mut cases: Vec<(String, MolecularIntegrals, usize)> = Vec::new();
    for name in BUILTIN_NAMES {
        let m = builtin(name).unwrap();
        cases.push((name.to_string(), m.integrals, m.n_electrons));
    }
    let spec = ensemble_spec();
    let seeds: HashSet<u64> = members.iter().map(|m| m.seed).collect();
    for &s in &seeds {
        let m = embedguide::model::build_impurity_model(
            spec.n_modes,
            spec.m,
            &embedguide::model::EpsilonSpec::Gapped {
                gap: spec.gap,
                n_negative: Some(spec.n_electrons),
            },
            &embedguide::model::ImpuritySpec::Random { magnitude: 0.5 },
            embedguide::model::Hybridization::RandomOrthogonal,
            s,
        )
        .unwrap();
        cases.push((format!("ensemble {s}"), m.integrals, spec.n_electrons));
    }
    let mono = builtin("dimer4").unwrap();
    for k in 1..=3 {
        for c in [None, Some(Coupling::uniform(4, 0.05))] {
            let ints = build_oligomer(&mono.integrals, k, c.as_ref()).unwrap();
            cases.push((format!("oligomer {k}"), ints, k * mono.n_electrons));
        }
    }
    for n in 4..=9 {
        for ne in 1..n {
            cases.push((format!("random {n}/{ne}"), random_model(n, 100 + n as u64).unwrap(), ne));
        }
    }
    let mut worst_e = 0.0f64;
    let mut worst_name = String::new();
    let mut checked = 0;
    let mut worst_apply = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (name, ints, ne) in &cases {
        let basis = enumerate_sector(ints.n_modes(), *ne, DEFAULT_MAX_DIM).unwrap();
        if basis.dim() > DENSE_MAX_DIM {
            continue;
        }
        let exact = dense_spectrum(ints, *ne).unwrap()[0];
        let it = ground_state(ints, *ne, &opts).unwrap().energy;
        if (it - exact).abs() > worst_e {
            worst_e = (it - exact).abs();
            worst_name = name.clone();
        }
        checked += 1;
        let h = dense_matrix(ints, &basis).unwrap();
        for _ in 0..2 {
            let v = WaveFunction::random(basis.clone(), &mut rng);
            let hv = apply_hamiltonian(ints, &v).unwrap();
            let hd = to_complex(&h) * nalgebra::DVector::from_column_slice(v.coeffs());
            let diff = hv
                .coeffs()
                .iter()
                .zip(hd.iter())
                .map(|(a, b): (&Complex64, &Complex64)| (a - b).norm())
                .fold(0.0, f64::max);
            worst_apply = worst_apply.max(diff);
        }
    }
    outcome(
        worst_e <= 1e-9 && worst_apply <= 1e-12,
        format!(
            "{checked} instances, max |E_iter - E_dense| = {worst_e:.3e} ({worst_name}), max |H v - apply| = {worst_apply:.3e}"
        ),
    )
}

fn decay_shape(members: &[EnsembleMember]) -> Outcome {
    let good = members
        .iter()
        .filter(|m| m.decay.regression.as_ref().is_some_and(|r| r.slope < 0.0 && r.r_squared >= 0.8))
        .count();
    let min_r2 = members
        .iter()
        .filter_map(|m| m.decay.regression.as_ref().map(|r| r.r_squared))
        .fold(f64::INFINITY, f64::min);
    outcome(
        good * 5 >= members.len() * 4,
        format!("{good}/{} instances with negative slope and R^2 >= 0.8 (min R^2 {min_r2:.3})", members.len()),
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

fn qpecost_arithmetic() -> Outcome {
    let mut fails = Vec::new();
    let r = qpe_cost(1.0, 0.01, QpeMode::Standard).unwrap();
    if !(close(r.repetitions, 1.0) && close(r.max_evolution_time, 100.0) && close(r.total_evolution_time, 100.0)) {
        fails.push("standard example");
    }
    let half = qpe_cost(0.5, 0.01, QpeMode::Standard).unwrap();
    if half.repetitions / r.repetitions != 4.0 {
        fails.push("repetition ratio");
    }
    let h = qpe_cost(0.9, 0.001, QpeMode::HighOverlap).unwrap();
    if !(close(h.delta.unwrap(), 0.19) && close(h.max_evolution_time, 190.0) && close(h.total_evolution_time, 190000.0))
    {
        fails.push("high-overlap example");
    }
    let count = |kind, p: GateParams| guiding_gate_counts(kind, &p).unwrap();
    let g = count(
        GuidingKind::Givens,
        GateParams {
            n_modes: Some(4),
            n_electrons: Some(2),
            ..Default::default()
        },
    );
    let s = count(
        GuidingKind::SumOfSlater,
        GateParams {
            n_modes: Some(10),
            l: Some(8),
            ..Default::default()
        },
    );
    let m = count(
        GuidingKind::Mps,
        GateParams {
            n_modes: Some(10),
            bond_dim: Some(2),
            ..Default::default()
        },
    );
    if g.two_qubit != 4.0 || s.two_qubit != 80.0 || s.toffoli != Some(24.0) || m.two_qubit != 40.0 {
        fails.push("gate counts");
    }
    let etas: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let epss: Vec<f64> = (0..10).map(|i| 10f64.powf(-1.0 - 0.3 * i as f64)).collect();
    let mut violations = 0;
    let mut points = 0;
    for mode in [QpeMode::Standard, QpeMode::Amplified, QpeMode::SingleAncilla, QpeMode::HighOverlap] {
        let grid: Vec<Vec<Option<[f64; 3]>>> = etas
            .iter()
            .map(|&eta| {
                epss.iter()
                    .map(|&eps| {
                        qpe_cost(eta, eps, mode)
                            .ok()
                            .map(|c| [c.repetitions, c.max_evolution_time, c.total_evolution_time])
                    })
                    .collect()
            })
            .collect();
        for i in 0..etas.len() {
            for j in 0..epss.len() {
                let Some(c) = grid[i][j] else { continue };
                points += 1;
                if c.iter().any(|&x| x < 0.0) {
                    violations += 1;
                }
                // eta increases with i, 1/eps increases with j
                if let Some(Some(next)) = grid.get(i + 1).map(|r| r[j]) {
                    violations += (0..3).filter(|&f| next[f] > c[f]).count();
                }
                if let Some(Some(next)) = grid[i].get(j + 1) {
                    violations += (0..3).filter(|&f| next[f] < c[f]).count();
                }
            }
        }
    }
    if violations > 0 {
        fails.push("monotonicity");
    }
    outcome(
        fails.is_empty(),
        format!("worked examples and {points} grid points; {violations} monotonicity violations; failures: {fails:?}"),
    )
}

fn csv_bodies(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn main() -> ExitCode {
    let config_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance.json");
    let base = ExperimentConfig::load(&config_path).expect("shipped acceptance config");
    let tmp = tempfile::tempdir().expect("temp dir");

    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();

    let t0 = Instant::now();
    let members = run_ensemble(&ensemble_spec(), DEFAULT_MAX_DIM).expect("ensemble");
    let ensemble_seconds = t0.elapsed().as_secs_f64();

    let mut cfg_a = base.clone();
    cfg_a.output = tmp.path().join("a");
    let mut cfg_b = base.clone();
    cfg_b.output = tmp.path().join("b");
    let run_a = harness::run(&cfg_a).expect("acceptance run");
    let run_b = harness::run(&cfg_b).expect("acceptance run");

    results.push((1, "Lemma certification", lemma(&members, ensemble_seconds)));
    results.push((2, "Embedding identity", embedding_identity()));
    results.push((3, "Trivial-embedding exactness", trivial_embedding()));
    results.push((4, "Oligomer product law", oligomer_product(&run_a)));
    results.push((5, "SOS identity", sos_identity()));
    results.push((6, "MPS compression", mps_curves()));
    results.push((7, "RDM suite", rdm_suite()));
    results.push((8, "Mixed-state overlap inequality", theorem3(&members)));
    results.push((9, "Oracle equivalence", oracle_equivalence(&members)));
    results.push((10, "Decay shape", decay_shape(&members)));
    results.push((11, "qpecost arithmetic", qpecost_arithmetic()));
    let (a, b) = (csv_bodies(&cfg_a.output), csv_bodies(&cfg_b.output));
    let identical = !a.is_empty() && a == b && run_a.tables == run_b.tables;
    results.push((
        12,
        "Reproducibility",
        outcome(identical, format!("{} CSV files compared byte-for-byte", a.len())),
    ));

    let mut failed = 0;
    for (id, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("{tag} [{id:>2}] {name}: {}", o.detail);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
