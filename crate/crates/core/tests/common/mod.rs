//! Synthetic experiment fixtures shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORDS: [&str; 4] = ["calm", "uneasy", "upset", "furious"];

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
}

impl Fixture {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

fn write(path: &Path, body: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, body).unwrap();
}

fn describe(label: usize) -> &'static str {
    [
        "0: no joy can be inferred",
        "1: low amount of joy can be inferred",
        "2: moderate amount of joy can be inferred",
        "3: high amount of joy can be inferred",
    ][label]
}

/// Unit direction of a class in the first two dimensions, so adjacent
/// classes are closer than distant ones.
fn center(label: usize) -> [f64; 2] {
    let theta = label as f64 * std::f64::consts::PI / 6.0;
    [theta.cos(), theta.sin()]
}

pub fn id(i: usize) -> String {
    format!("2018-Syn-{i:05}")
}

/// A four-class, eight-dimensional joy dataset with `n_merged` train+dev
/// rows and `n_test` labelled test rows, plus embeddings for the `raw` and
/// `general` variants, an AI lexicon and a stop-word list. `extra` is
/// appended to the generated config.
pub fn synthetic(n_merged: usize, n_test: usize, noise: f64, seed: u64, extra: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let header = "ID\tTweet\tAffect Dimension\tIntensity Class\n";
    let (mut train, mut dev, mut test) =
        (header.to_string(), header.to_string(), header.to_string());
    let mut raw_emb = String::from("#model=synth level=sentence dim=8\n");
    let mut gen_emb = String::from("#model=synth level=sentence dim=8\n# general variant\n");
    let n_train = n_merged * 4 / 5;
    for i in 0..n_merged + n_test {
        let label = i % 4;
        let text = format!("@user tweet {i} feels {}!! #syn", WORDS[label]);
        let row = format!("{}\t{text}\tjoy\t{}\n", id(i), describe(label));
        if i < n_train {
            train.push_str(&row);
        } else if i < n_merged {
            dev.push_str(&row);
        } else {
            test.push_str(&row);
        }
        let c = center(label);
        let v: Vec<f64> = (0..8)
            .map(|d| {
                let base = if d < 2 { c[d] } else { 0.0 };
                base + rng.random_range(-noise..=noise)
            })
            .collect();
        let cells: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(raw_emb, "{}\t0\t{}", id(i), cells.join(" "));
        let cells: Vec<String> = v.iter().map(|x| format!("{:?}", x * 1.5 + 0.01)).collect();
        let _ = writeln!(gen_emb, "{}\t0\t{}", id(i), cells.join(" "));
    }
    write(&root.join("data/joy-train.txt"), &train);
    write(&root.join("data/joy-dev.txt"), &dev);
    write(&root.join("data/joy-test.txt"), &test);
    write(&root.join("emb/synth-raw.emb"), &raw_emb);
    write(&root.join("emb/synth-general.emb"), &gen_emb);
    write(
        &root.join("lex/ai.txt"),
        "word\tanger\tfear\tjoy\tsadness\ncalm\t0.0\t0.1\t0.2\t0.0\nuneasy\t0.2\t0.6\t0.4\t0.1\nupset\t0.6\t0.3\t0.6\t0.4\nfurious\t0.9\t0.2\t0.9\t0.2\n",
    );
    write(
        &root.join("lex/ai.toml"),
        "lexicon = \"AI\"\nfile = \"ai.txt\"\nheader_lines = 1\nlayout = \"wide\"\nscore_columns = [1, 2, 3, 4]\n",
    );
    write(&root.join("res/stop.txt"), "tweet\nfeels\n");
    let config = format!(
        r#"seed = 2018
folds = 5
out_dir = "out"

[data.joy]
train = "data/joy-train.txt"
dev = "data/joy-dev.txt"
test = "data/joy-test.txt"

[resources]
stopwords = "res/stop.txt"

[lexicons]
AI = "lex/ai.toml"

[[embeddings]]
model = "synth"
cleaning = "raw"
files = ["emb/synth-raw.emb"]

[[embeddings]]
model = "synth"
cleaning = "general"
emotion = "joy"
files = ["emb/synth-general.emb"]

{extra}
"#
    );
    let config_path = root.join("experiment.toml");
    write(&config_path, &config);
    Fixture {
        dir,
        config: config_path,
    }
}

/// Every file under `dir`, relative path and contents, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}
