use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgen"))
        .args(args)
        .env_remove("LGEN_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn endorsement(o: &Output) -> f64 {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let last = stdout(o).lines().last().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&last).unwrap();
    v["endorsement"].as_f64().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn endorse_examples() {
    let female = endorsement(&lgen(&["endorse", "--fixture", "is female", "--referent", "0.5"]));
    assert!((0.45..=0.55).contains(&female), "{female}");
    let sharks = endorsement(&lgen(&["endorse", "--fixture", "doesn't eat people", "--referent", "0.95"]));
    assert!(sharks < 0.5, "{sharks}");

    let dir = tempfile::tempdir().unwrap();
    let uniform = dir.path().join("uniform.json");
    std::fs::write(&uniform, r#"{"phi": 1.0, "gamma": 0.5, "xi": 2.0}"#).unwrap();
    let s = endorsement(&lgen(&["endorse", "--prior-file", p(&uniform), "--referent", "0.5", "--lambda", "1"]));
    assert!((s - 0.5).abs() <= 0.01, "{s}");
}

#[test]
fn endorse_writes_interpretation_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    let o = lgen(&["endorse", "--fixture", "lays eggs", "--referent", "0.5", "--table", p(&table)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("p,prior,posterior\n"));
    assert_eq!(text.lines().count(), 101);
}

#[test]
fn endorse_rate_and_expectation() {
    let climbs = endorsement(&lgen(&["endorse", "--fixture", "climbs mountains", "--referent", "0.6"]));
    let runs = endorsement(&lgen(&["endorse", "--fixture", "runs", "--referent", "0.6"]));
    assert!(climbs > runs);
    let s = endorsement(&lgen(&[
        "endorse", "--fixture", "lays eggs", "--variant", "expectation", "--referent-beta", "0.5,50",
    ]));
    assert!(s > 0.5 && s < 1.0, "{s}");
}

#[test]
fn exit_codes() {
    assert_eq!(lgen(&["endorse", "--fixture", "is female", "--referent", "1.5"]).status.code(), Some(2));
    assert_eq!(lgen(&["endorse", "--prior-file", "/no/such/file.json", "--referent", "0.5"]).status.code(), Some(2));
    assert_eq!(lgen(&["no-such-verb"]).status.code(), Some(2));
    // "more than everything" is false on every grid point
    assert_eq!(lgen(&["interpret", "--fixture", "is female", "--utterance", "quant:1"]).status.code(), Some(3));
}

#[test]
fn interpret_generalization() {
    let o = lgen(&["interpret", "--fixture", "lays eggs", "--utterance", "gen"]);
    assert!(o.status.success());
    let last = stdout(&o).lines().last().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&last).unwrap();
    assert!(v["posterior_mean"].as_f64().unwrap() > v["prior_mean"].as_f64().unwrap());
}

#[test]
fn fit_prior_outputs_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prior.csv");
    let o = lgen(&[
        "simulate", "prior", "--phi", "0.6", "--gamma", "0.5", "--xi", "20", "--n", "120", "--out", p(&input), "--seed", "2",
    ]);
    assert!(o.status.success());
    let args = |out: &Path| {
        lgen(&[
            "fit-prior", "--input", p(&input), "--out", p(out), "--single-beta", "--iterations", "3000", "--burn-in", "1000",
            "--seed", "5",
        ])
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(args(&a).status.success());
    assert!(args(&b).status.success());
    for name in [
        "synthetic.samples.csv",
        "synthetic.map.json",
        "synthetic.single.samples.csv",
        "synthetic.single.map.json",
        "synthetic.ppc.csv",
    ] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name} differs between runs");
    }
    let ppc = std::fs::read_to_string(a.join("synthetic.ppc.csv")).unwrap();
    assert!(ppc.starts_with("x,data,predictive_mixture,predictive_single\n"));
    let map: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("synthetic.map.json")).unwrap()).unwrap();
    for k in ["phi", "gamma", "xi"] {
        assert!(map["map"][k].is_number(), "{k}");
    }
}

#[test]
fn fit_prior_rejects_empty_property() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "participant_id,property,category,response_pct\np1,f,k,50\np2,,k,40\n").unwrap();
    let o = lgen(&["fit-prior", "--input", p(&input), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn simulate_then_fit_joint() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(lgen(&["simulate", "joint", "--out", p(&sim), "--seed", "1"]).status.success());
    for f in ["prior.csv", "referents.csv", "endorsements.csv", "truth.json"] {
        assert!(sim.join(f).is_file(), "{f}");
    }
    let fit = dir.path().join("fit");
    let o = lgen(&[
        "fit-joint",
        "--prior",
        p(&sim.join("prior.csv")),
        "--referents",
        p(&sim.join("referents.csv")),
        "--endorsements",
        p(&sim.join("endorsements.csv")),
        "--out",
        p(&fit),
        "--iterations",
        "1500",
        "--burn-in",
        "500",
        "--chains",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("lambda"));
    let preds = std::fs::read_to_string(fit.join("predictions.csv")).unwrap();
    assert!(preds.starts_with("item,human,model,lo,hi\n"));
    assert_eq!(preds.lines().count(), 6);
    assert!(fit.join("samples.csv").is_file() && fit.join("summary.json").is_file());
}

#[test]
fn simulate_fixed_model() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let o = lgen(&["simulate", "joint", "--model", "fixed", "--theta-star", "0.3", "--noise", "0.2", "--out", p(&sim)]);
    assert!(o.status.success());
    let truth = std::fs::read_to_string(sim.join("truth.json")).unwrap();
    assert!(truth.contains("\"theta_star\": 0.3"));
}

#[test]
fn replicate_modes() {
    let o = lgen(&["replicate", "worked-examples"]);
    let text = stdout(&o);
    assert!(o.status.success());
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{text}");

    let o = lgen(&["replicate", "causals"]);
    let text = stdout(&o);
    assert!(text.contains("published causals data not found"));
    assert!(text.contains("PASS rare weak"));

    let o = lgen(&["replicate", "habituals"]);
    assert!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count() >= 2);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep");
    let o = lgen(&["replicate", "generics", "--data-dir", p(dir.path()), "--out", p(&out)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("missing:"));
    assert!(out.join("generics_synthetic.json").is_file());

    let o = lgen(&["replicate", "conjunction"]);
    assert!(stdout(&o).contains("non-monotone=true"));
}

#[test]
fn cue_validity_world() {
    let dir = tempfile::tempdir().unwrap();
    let world = dir.path().join("world.csv");
    std::fs::write(&world, "category,prior_prob,f,same,none\nA,0.5,0.9,0.4,0\nB,0.3,0.1,0.4,0\nC,0.2,0,0.4,0\n").unwrap();
    let o = lgen(&["cue-validity", "--world", p(&world)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row = |f: &str, k: &str| -> Vec<String> {
        text.lines()
            .find(|l| l.starts_with(&format!("{f},{k},")))
            .unwrap()
            .split(',')
            .map(str::to_string)
            .collect()
    };
    let a: f64 = row("f", "A")[2].parse().unwrap();
    assert!((a - 0.9375).abs() < 1e-12);
    for (k, pk) in [("A", 0.5), ("B", 0.3), ("C", 0.2)] {
        let v: f64 = row("same", k)[2].parse().unwrap();
        assert!((v - pk).abs() < 1e-12);
    }
    // absent feature is flagged, not fatal
    assert!(row("none", "A")[4].contains("undefined"));
}

#[test]
fn cue_validity_world_agrees_with_free_production() {
    let probs = [0.5, 0.3, 0.2];
    let prev = [0.9, 0.1, 0.05];
    let names = ["mosquito", "fly", "bee"];
    let dir = tempfile::tempdir().unwrap();
    let world = dir.path().join("world.csv");
    let mut w = String::from("category,prior_prob,f\n");
    for i in 0..3 {
        w.push_str(&format!("{},{},{}\n", names[i], probs[i], prev[i]));
    }
    std::fs::write(&world, w).unwrap();
    // each produced label names the category of a random feature bearer
    let z: f64 = probs.iter().zip(&prev).map(|(a, b)| a * b).sum();
    let weights: Vec<f64> = probs.iter().zip(&prev).map(|(a, b)| a * b / z).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 4000;
    let mut free = String::from("feature,response\n");
    for _ in 0..n {
        let u: f64 = rng.random();
        let k = if u < weights[0] { 0 } else if u < weights[0] + weights[1] { 1 } else { 2 };
        let label = if k == 0 { "Mosquitoes" } else { names[k] };
        free.push_str(&format!("f,{label}\n"));
    }
    let fp = dir.path().join("free.csv");
    std::fs::write(&fp, free).unwrap();
    let world_out = stdout(&lgen(&["cue-validity", "--world", p(&world), "--target", "mosquito"]));
    let free_out = stdout(&lgen(&["cue-validity", "--free-production", p(&fp), "--target", "mosquito"]));
    let value = |text: &str| -> f64 { text.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap() };
    let (a, b) = (value(&world_out), value(&free_out));
    let se = (a * (1.0 - a) / n as f64).sqrt();
    assert!((a - b).abs() < 4.0 * se, "world {a} vs free production {b}");
}

#[test]
fn outputs_are_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("interp.csv");
    assert!(lgen(&["interpret", "--fixture", "has wings", "--out", p(&out)]).status.success());
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["interp.csv"]);
}
