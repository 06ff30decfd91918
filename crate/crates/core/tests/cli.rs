mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use emoknn::data::{parse_dataset, Split};
use emoknn::explain::ExplanationReport;

fn emoknn(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emoknn"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const GRID: &str = r#"
[sweep]
features = ["emb:synth", "lex:AI", "emb:synth+lex:AI"]
cleaning = ["raw", "general"]
k = [5, "auto"]
"#;

#[test]
fn sweep_writes_every_table() {
    let fx = common::synthetic(120, 20, 0.15, 11, GRID);
    let out = fx.path().join("out");
    let o = emoknn(&["sweep", "--jobs", "2"], &fx.config, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("joy: best"));

    let sweep = read(&out.join("sweep.tsv"));
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines.len(), 1 + 3 * 2 * 2);
    assert!(lines[0].starts_with("emotion\tfeatures\tcleaning\tk_choice\tk\taggregation\tfold_1"));
    assert!(lines[0].ends_with("fold_5\tmean_pcc\tstatus"));
    assert!(lines[1..].iter().all(|l| l.ends_with("\tok")), "{sweep}");
    assert!(lines[1].starts_with("joy\temb:synth\traw\t5\t5\t"));
    assert!(lines[2].starts_with("joy\temb:synth\traw\tauto\t5\t"));

    let best = read(&out.join("best.tsv"));
    assert_eq!(best.lines().count(), 2);
    let ttest = read(&out.join("ttest.tsv"));
    assert_eq!(ttest.lines().count(), 1 + 3 * 2);
    let datasets = read(&out.join("datasets.tsv"));
    assert_eq!(
        datasets.lines().nth(1).unwrap(),
        "joy\t120\t30\t30\t30\t30\t1"
    );
    assert!(!out.join("ensemble.tsv").exists());
}

#[test]
fn predict_uses_best_setup_after_sweep() {
    let extra = format!("{GRID}\n[explain]\nids = [\"{}\"]\n", common::id(125));
    let fx = common::synthetic(120, 20, 0.15, 12, &extra);
    let out = fx.path().join("out");

    let early = emoknn(&["predict"], &fx.config, &out);
    assert!(!early.status.success());
    assert!(
        stderr(&early).contains("run a sweep first"),
        "{}",
        stderr(&early)
    );

    assert!(emoknn(&["sweep"], &fx.config, &out).status.success());
    let o = emoknn(&["predict"], &fx.config, &out);
    assert!(o.status.success(), "{}", stderr(&o));

    let sub = out.join("submission/EI-oc_en_joy_pred.txt");
    let parsed = parse_dataset(&sub, Split::Test).unwrap();
    assert_eq!(parsed.len(), 20);
    let body = read(&sub);
    assert!(body.starts_with("ID\tTweet\tAffect Dimension\tIntensity Class\n"));
    assert!(body.contains("can be inferred"));

    let summary = read(&out.join("predict.tsv"));
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[0], "joy");
    assert!(row[2].parse::<f64>().unwrap() > 0.8, "{summary}");

    let json = read(&out.join(format!("explanations/{}.json", common::id(125))));
    let report = ExplanationReport::from_json(&json).unwrap();
    assert_eq!(report.members.len(), 1);
    assert_eq!(report.gold.map(|g| g.value()), Some(1));
    assert!(out
        .join(format!("explanations/{}.txt", common::id(125)))
        .exists());
}

const ENSEMBLE: &str = r#"
[[ensemble.members]]
features = "emb:synth"
cleaning = "raw"
k = 5

[[ensemble.members]]
features = "lex:AI"
cleaning = "general+stopwords"
k = 7
aggregation = "weighted_majority"

[[ensemble.members]]
features = "emb:synth+lex:AI"
cleaning = "general"
k = "auto"
"#;

#[test]
fn ensemble_sweep_predict_and_explain() {
    let fx = common::synthetic(120, 20, 0.15, 13, ENSEMBLE);
    let out = fx.path().join("out");
    let o = emoknn(&["sweep"], &fx.config, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("joy: ensemble mean PCC"));
    let ens = read(&out.join("ensemble.tsv"));
    assert!(ens.lines().nth(1).unwrap().ends_with("\tok"), "{ens}");
    assert_eq!(read(&out.join("sweep.tsv")).lines().count(), 1);

    let o = emoknn(&["predict"], &fx.config, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let scores = read(&out.join("submission/joy-scores.tsv"));
    let header: Vec<&str> = scores.lines().next().unwrap().split('\t').collect();
    assert_eq!(header.len(), 3 + 3);

    let id = common::id(130);
    let o = Command::new(env!("CARGO_BIN_EXE_emoknn"))
        .args(["explain", "--ids", &id, "--config"])
        .arg(&fx.config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains(&format!("Instance {id}")), "{text}");
    assert!(text.contains("lex:AI"));
    let report =
        ExplanationReport::from_json(&read(&out.join(format!("explanations/{id}.json")))).unwrap();
    assert_eq!(report.members.len(), 3);
    let ks: Vec<usize> = report.members.iter().map(|m| m.histogram.k).collect();
    assert_eq!(ks, [5, 7, emoknn::knn::rule_of_thumb_k(120)]);
    for m in &report.members {
        assert_eq!(m.histogram.counts.iter().sum::<usize>(), m.histogram.k);
    }

    let o = Command::new(env!("CARGO_BIN_EXE_emoknn"))
        .args(["explain", "--ids", "nope", "--config"])
        .arg(&fx.config)
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nope"));
}

#[test]
fn validate_passes_then_catches_missing_embeddings() {
    let fx = common::synthetic(60, 10, 0.1, 14, GRID);
    let out = fx.path().join("out");
    let o = emoknn(&["validate"], &fx.config, &out);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 failed"));

    let emb = fx.path().join("emb/synth-general.emb");
    let text = read(&emb);
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with(&common::id(3)))
        .collect();
    fs::write(&emb, kept.join("\n") + "\n").unwrap();
    let o = emoknn(&["validate"], &fx.config, &out);
    assert!(!o.status.success());
    let report = stdout(&o);
    assert!(
        report.contains("FAIL  joy embeddings synth (general)"),
        "{report}"
    );
    assert!(report.contains(&common::id(3)));
}

#[test]
fn sweep_records_failures_instead_of_aborting() {
    let grid =
        "[sweep]\nfeatures = [\"emb:synth\", \"emb:absent\"]\ncleaning = [\"raw\"]\nk = [3]\n";
    let fx = common::synthetic(60, 10, 0.1, 15, grid);
    let out = fx.path().join("out");
    let o = emoknn(&["sweep"], &fx.config, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let sweep = read(&out.join("sweep.tsv"));
    let rows: Vec<&str> = sweep.lines().skip(1).collect();
    assert!(rows[0].ends_with("\tok"));
    assert!(
        rows[1].contains("\tNA\t") && rows[1].contains("error: lookup failed"),
        "{sweep}"
    );
    assert!(read(&out.join("best.tsv")).contains("emb:synth"));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let fx = common::synthetic(40, 4, 0.1, 16, GRID);
    let out = fx.path().join("out");
    let o = emoknn(&["sweep", "--emotion", "anger"], &fx.config, &out);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("anger"));
    let o = emoknn(&["sweep", "--emotion", "rage"], &fx.config, &out);
    assert!(!o.status.success());
    let o = emoknn(&["sweep"], &fx.path().join("missing.toml"), &out);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing.toml"));
}

#[test]
fn seed_override_changes_folds_but_not_determinism() {
    let fx = common::synthetic(
        80,
        4,
        0.6,
        17,
        "[sweep]\nfeatures = [\"emb:synth\"]\ncleaning = [\"raw\"]\nk = [3]\n",
    );
    let run = |seed: &str, name: &str| {
        let out = fx.path().join(name);
        let o = emoknn(&["sweep", "--seed", seed], &fx.config, &out);
        assert!(o.status.success(), "{}", stderr(&o));
        read(&out.join("sweep.tsv"))
    };
    let a = run("1", "a");
    let b = run("1", "b");
    let c = run("2", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}
