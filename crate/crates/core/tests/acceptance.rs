//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p nosig-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use num_rational::Ratio;
use nosig_core::behavior::{
    boxes, check_fns, check_functional_locality_equivalence, check_no_signaling, FunctionTuple,
};
use nosig_core::experiment::{
    azuma_audit, invariance_test, martingale_audit, run_experiment, ExperimentConfig, ExperimentOutcome,
    InvarianceConfig, MartingaleConfig, RootSampler,
};
use nosig_core::game::GameVariant;
use nosig_core::strategy::LookupTable;
use nosig_core::{BitStream, Oracle, Referee, StrategySpec, TrialRecord};

const TRIALS: u64 = 10_000;
const PLAYERS: u64 = 64;
const SEED: u64 = 20_240_611;

struct Suite {
    failed: usize,
}

impl Suite {
    fn report(&mut self, name: &str, pass: bool, detail: String) {
        let status = if pass { "PASS" } else { "FAIL" };
        println!("{status}  {name}: {detail}");
        if !pass {
            self.failed += 1;
        }
    }
}

fn spec(text: &str) -> StrategySpec {
    StrategySpec::parse(text).expect("suite strategies parse")
}

fn tables(max_m: u32) -> Vec<(String, StrategySpec)> {
    (0..=max_m)
        .flat_map(|m| {
            (0..1u64 << (1u64 << m)).map(move |i| {
                let t = LookupTable::enumerate(m, i);
                let bits: String = t.entries().iter().map(|b| char::from(b'0' + b)).collect();
                (
                    format!("local-table:{m}:{bits}"),
                    StrategySpec::LocalTable { m, table: t.entries().to_vec() },
                )
            })
        })
        .collect()
}

fn mixture(shared: bool) -> StrategySpec {
    let components = ["constant:1", "local-table:1:01", "local-random:0.3", "local-table:3:00010111"];
    let json = format!(
        r#"{{"name":"mixture","shared":{shared},"components":[{}]}}"#,
        components
            .iter()
            .enumerate()
            .map(|(i, c)| format!(
                r#"{{"weight":{},"strategy":{}}}"#,
                i + 1,
                serde_json::to_string(&spec(c)).unwrap()
            ))
            .collect::<Vec<_>>()
            .join(",")
    );
    spec(&json)
}

/// The NS-local strategies used for the concentration audits.
fn local_suite() -> Vec<(String, StrategySpec)> {
    let mut suite: Vec<(String, StrategySpec)> = [
        "constant:0",
        "constant:1",
        "local-table:1:01",
        "local-table:2:0110",
        "local-table:3:00010111",
        "local-random:0.3",
        "local-random:0.5",
        "local-random:0.9",
    ]
    .iter()
    .map(|s| (s.to_string(), spec(s)))
    .collect();
    suite.push(("mixture(shared)".into(), mixture(true)));
    suite.push(("mixture(private)".into(), mixture(false)));
    suite
}

fn run(strategy: StrategySpec, seed: u64) -> ExperimentOutcome {
    let mut cfg = ExperimentConfig::new(strategy, PLAYERS, TRIALS, seed);
    cfg.parallelism = 8;
    run_experiment(&cfg).expect("suite experiments run")
}

fn win_rates(suite: &mut Suite) {
    let started = Instant::now();
    let mut strategies = tables(3);
    strategies.extend(local_suite().into_iter().filter(|(n, _)| !n.starts_with("local-table") && !n.starts_with("constant")));
    let mut worst = (String::new(), 0.5, (0.5, 0.5));
    for (i, (name, s)) in strategies.iter().enumerate() {
        let pooled = run(s.clone(), SEED + i as u64).win_rates.pooled;
        if (pooled.frequency - 0.5).abs() >= (worst.1 - 0.5f64).abs() {
            worst = (name.clone(), pooled.frequency, (pooled.low, pooled.high));
        }
    }
    let (name, freq, (lo, hi)) = worst;
    suite.report(
        "win rate of probabilistic NS strategies",
        (freq - 0.5).abs() <= 0.015,
        format!(
            "{} strategies (all {} tables with m<=3, Bernoulli 0.3/0.5/0.9, mixtures), T={TRIALS}, K={PLAYERS}; \
             worst pooled rate {freq:.5} ({name}, 3-sigma Wilson [{lo:.5}, {hi:.5}]) within 0.5 +- 0.015; {:.1?}",
            strategies.len(),
            strategies.len() - 5,
            started.elapsed()
        ),
    );
}

/// Player 1 under a table reading `m` bits sees root bits `2..=m+1` and must
/// name root bit 1, which is independent of the view and takes both values.
fn exact_half(suite: &mut Suite) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for (name, s) in tables(3) {
        let StrategySpec::LocalTable { m, ref table } = s else { unreachable!() };
        // exact average over (root bit 1, view) of [table entry for the view = root bit 1]
        let cells = 2 * table.len() as u64;
        let analytic: Ratio<u64> = (0..table.len())
            .flat_map(|v| (0..2u8).map(move |b| (v, b)))
            .map(|(v, b)| Ratio::new((table[v] == b) as u64, cells))
            .sum();
        // implementation: play every root prefix of length m+1 on a periodic root
        let referee = Referee::new(GameVariant::Baker, 1, s.build().unwrap(), Oracle::canonical()).unwrap();
        let mut wins = 0u64;
        let mut per_view_ok = true;
        for view in 0..1u64 << m {
            let mut view_wins = 0;
            for target in 0..2u8 {
                let mut prefix = vec![target];
                prefix.extend((0..m).rev().map(|j| ((view >> j) & 1) as u8));
                let root = BitStream::periodic(prefix, vec![0]).unwrap();
                let r = referee.run_trial(&root, 0).unwrap();
                view_wins += r.wins() as u64;
            }
            per_view_ok &= view_wins == 1;
            wins += view_wins;
        }
        let empirical = Ratio::new(wins, 2u64 << m);
        checked += 1;
        if analytic != Ratio::new(1, 2) || empirical != Ratio::new(1, 2) || !per_view_ok {
            bad.push(name);
        }
    }
    suite.report(
        "exact win probability 1/2",
        bad.is_empty() && checked == 278,
        format!("{checked} deterministic tables with m<=3: analytic and enumerated win probability exactly 1/2; failures {bad:?}"),
    );
}

fn fns_separation(suite: &mut Suite) {
    let started = Instant::now();
    let mut lines = Vec::new();
    let mut all = true;
    for d in [0u64, 2, 8] {
        let mut cfg = ExperimentConfig::new(StrategySpec::Fns, PLAYERS, 1000, SEED + d);
        cfg.root_override_depth = d;
        let out = run_experiment(&cfg).unwrap();
        let mut beyond_ok = true;
        let mut threshold_ok = true;
        let mut outputs_ok = true;
        for t in &out.trials {
            beyond_ok &= t.s[d as usize..].iter().all(|&s| s == 1);
            threshold_ok &= t.threshold.is_some_and(|th| th <= d);
            // the representative of a flipped-prefix root is its pristine base
            let base = t.root.without_overrides();
            outputs_ok &= (1..=PLAYERS).all(|k| t.outputs[k as usize - 1] == base.bit_at(k));
        }
        let max_th = out.trials.iter().filter_map(|t| t.threshold).max().unwrap_or(0);
        all &= beyond_ok && threshold_ok && outputs_ok;
        lines.push(format!(
            "d={d}: pooled {:.4}, max threshold {max_th}, players k>d all won: {beyond_ok}",
            out.win_rates.pooled.frequency
        ));
    }
    suite.report(
        "FNS separation",
        all,
        format!("1000 trials, K={PLAYERS}; {}; {:.1?}", lines.join("; "), started.elapsed()),
    );
}

fn azuma(suite: &mut Suite, logs: &[(String, ExperimentOutcome)]) {
    let mut points = 0;
    let mut violations = Vec::new();
    let mut tightest = f64::INFINITY;
    for (name, out) in logs {
        let valid: Vec<&TrialRecord> = out.trials.iter().filter(|t| t.valid).collect();
        let report = azuma_audit(&valid, &[16, 32, 64], &[4.0, 8.0, 16.0], 3.0);
        for p in &report.points {
            points += 1;
            tightest = tightest.min(p.bound + p.margin - p.frequency);
            if p.violation || p.frequency > p.bound + p.margin {
                violations.push(format!("{name} n={} eps={}", p.n, p.epsilon));
            }
        }
    }
    suite.report(
        "Azuma audit",
        violations.is_empty(),
        format!(
            "{} strategies x 9 grid points ({points} checks), T={TRIALS}: zero violations required, found {}; \
             smallest slack bound+margin-frequency {tightest:.4}",
            logs.len(),
            violations.len()
        ),
    );
}

fn martingale(suite: &mut Suite, logs: &[(String, ExperimentOutcome)]) {
    let cfg = MartingaleConfig::default();
    let mut failures = Vec::new();
    let mut increments_ok = true;
    let mut bins = 0;
    for (name, out) in logs {
        let report = martingale_audit(&out.trials, &cfg).unwrap();
        increments_ok &= report.increment_violations == 0;
        bins += report.bins_tested;
        if !report.martingale_holds {
            failures.push(name.clone());
        }
    }
    let mut fns = ExperimentConfig::new(StrategySpec::Fns, PLAYERS, TRIALS, SEED);
    fns.root_override_depth = 8;
    let fns_report = martingale_audit(&run_experiment(&fns).unwrap().trials, &cfg).unwrap();
    let fns_fails = !fns_report.martingale_holds && fns_report.verdict.contains("FAILS");
    suite.report(
        "martingale property",
        failures.is_empty() && increments_ok && fns_fails,
        format!(
            "local suite: +-1 increments on every trajectory {increments_ok}, {bins} bins at family-wise 3 sigma, failing strategies {failures:?}; \
             FNS log (d=8): \"{}\"",
            fns_report.verdict
        ),
    );
}

fn invariance(suite: &mut Suite) {
    let started = Instant::now();
    let base = InvarianceConfig { samples: 1_000_000, bins: 256, seed: SEED, shifts: 1, sampler: RootSampler::Uniform };
    let once = invariance_test(&base).unwrap();
    let iterated = invariance_test(&InvarianceConfig { shifts: 16, ..base.clone() }).unwrap();
    let adversarial = invariance_test(&InvarianceConfig { sampler: RootSampler::MinOfTwo, ..base }).unwrap();
    let pass = once.chi_square.p_value > 1e-3 && iterated.chi_square.p_value > 1e-3 && adversarial.chi_square.p_value < 1e-6;
    suite.report(
        "measure invariance",
        pass,
        format!(
            "256 bins, 1e6 samples: p={:.4} after one shift, p={:.4} after 16 shifts (both > 0.001); \
             min-of-two sampler p={:.3e} (< 1e-6); {:.1?}",
            once.chi_square.p_value,
            iterated.chi_square.p_value,
            adversarial.chi_square.p_value,
            started.elapsed()
        ),
    );
}

fn behavior_verifier(suite: &mut Suite) {
    let pr = check_no_signaling(&boxes::pr_box(), 0.0, false).unwrap();
    let sig = check_no_signaling(&boxes::signaling_box(), 0.0, false).unwrap();
    // Bob's output copies Alice's input, so P(b=0 | x, y) is 1 at x=0 and 0 at x=1.
    let located = sig.violations.iter().any(|v| {
        v.parties == [2]
            && v.reference_x[1] == v.other_x[1]
            && v.reference_x[0] != v.other_x[0]
            && v.inputs == [v.reference_x[1]]
            && {
                let expected = |x0: usize| if (x0 == 0) == (v.outputs[0] == 0) { "1" } else { "0" };
                v.reference_value == expected(v.reference_x[0]) && v.other_value == expected(v.other_x[0])
            }
    });
    let only_bob = sig.violations.iter().all(|v| v.parties == [2]);

    // independent count: f_A(x, y) and f_B(x, y) as 4-bit truth tables over 2x + y
    let mut total = 0;
    let mut fns = 0;
    let mut agree = true;
    for fa in 0..16u32 {
        for fb in 0..16u32 {
            let at = |f: u32, x: usize, y: usize| ((f >> (2 * x + y)) & 1) as usize;
            let factored = (0..2).all(|x| at(fa, x, 0) == at(fa, x, 1)) && (0..2).all(|y| at(fb, 0, y) == at(fb, 1, y));
            let ft = FunctionTuple::from_fn(vec![2, 2], vec![2, 2], |k, x| at([fa, fb][k], x[0], x[1])).unwrap();
            let fns_pass = check_fns(&ft).pass;
            let ns_pass = check_no_signaling(&ft.to_behavior(), 0.0, false).unwrap().pass;
            agree &= fns_pass == factored && ns_pass == factored;
            total += 1;
            fns += fns_pass as u32;
        }
    }
    let report = check_functional_locality_equivalence(&[2, 2], &[2, 2]).unwrap();
    let counts_ok = total == 256
        && fns == 16
        && report.total == 256
        && report.fns_count == 16
        && report.factored_count == 16
        && report.equal;
    suite.report(
        "behavior verifier",
        pr.pass && !sig.pass && located && only_bob && agree && counts_ok,
        format!(
            "PR box NS {}; b=x box NS {} with {} violation(s) on party 2 marginal located: {located}; \
             2-party binary enumeration total {} FNS {} factored {} equal {} (independent recount {fns}/{total}, agreement {agree})",
            if pr.pass { "pass" } else { "fail" },
            if sig.pass { "pass" } else { "fail" },
            sig.violations.len(),
            report.total,
            report.fns_count,
            report.factored_count,
            report.equal
        ),
    );
}

fn reproducibility(suite: &mut Suite) {
    let mut checked = Vec::new();
    let mut all = true;
    let configs: Vec<(&str, StrategySpec, u64)> = vec![
        ("local-random:0.5", spec("local-random:0.5"), 0),
        ("mixture(shared)", mixture(true), 0),
        ("local-table:3:00010111", spec("local-table:3:00010111"), 0),
        ("fns d=8", StrategySpec::Fns, 8),
    ];
    for (name, s, d) in configs {
        let mut cfg = ExperimentConfig::new(s, PLAYERS, 2_000, SEED);
        cfg.root_override_depth = d;
        let serial = serde_json::to_vec(&run_experiment(&cfg).unwrap()).unwrap();
        cfg.parallelism = 8;
        let parallel = serde_json::to_vec(&run_experiment(&cfg).unwrap()).unwrap();
        let rerun = serde_json::to_vec(&run_experiment(&cfg).unwrap()).unwrap();
        all &= serial == parallel && parallel == rerun;
        checked.push(format!("{name} ({} bytes)", serial.len()));
    }
    suite.report(
        "reproducibility",
        all,
        format!("parallelism 1 vs 8 and re-run byte-identical JSON: {}", checked.join(", ")),
    );
}

fn main() -> ExitCode {
    let mut suite = Suite { failed: 0 };
    win_rates(&mut suite);
    exact_half(&mut suite);
    fns_separation(&mut suite);
    let logs: Vec<(String, ExperimentOutcome)> = local_suite()
        .into_iter()
        .enumerate()
        .map(|(i, (name, s))| (name, run(s, SEED + 1000 + i as u64)))
        .collect();
    azuma(&mut suite, &logs);
    martingale(&mut suite, &logs);
    invariance(&mut suite);
    behavior_verifier(&mut suite);
    reproducibility(&mut suite);
    if suite.failed == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria FAIL", suite.failed);
        ExitCode::FAILURE
    }
}
