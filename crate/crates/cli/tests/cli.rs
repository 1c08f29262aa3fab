use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use zerodelay::commands::{self, checkpoint_path};
use zerodelay::persist::{cache_path, load_window_cache, save_window_cache, window_key, Checkpoint};
use zerodelay::results::HEADER;
use zerodelay::ExperimentConfig;
use zerodelay_core::qlearn::train;

fn matrices() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/matrices")
}

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let m = matrices();
    let text = body
        .replace("@M", m.to_str().unwrap())
        .replace("@OUT", dir.join("out").to_str().unwrap());
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const IID_RATE2: &str = "\
source = @M/iid8.txt
channel = noiseless 4
pruning = nonempty_bins, canonical_labels, interval_bins
scheme = window
n = 1
beta = 0.9999
max_steps = 500000
check_interval = 500000
horizon = 100000
seeds = 1, 2
output_dir = @OUT
";

const MARKOV4_LATTICE: &str = "\
source = @M/markov4.txt
channel = symmetric 4 0.06
pruning = canonical_labels
scheme = lattice
n = 4
beta = 0.9999
max_steps = 200000
check_interval = 200000
horizon = 20000
seeds = 1
output_dir = @OUT
";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zerodelay"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn inspect_reports_contraction() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "m.conf", MARKOV4_LATTICE);
    let o = run(&["inspect", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("delta(T)         0.666667"), "{s}");
    assert!(s.contains("alpha (1-delta)  0.333333"), "{s}");
    assert!(s.contains("certified"), "{s}");

    let c = config(d.path(), "i.conf", IID_RATE2);
    let s = stdout(&run(&["inspect", c.to_str().unwrap()]));
    assert!(s.contains("delta(O)         0.000000"), "{s}");
}

#[test]
fn inspect_ternary_channel() {
    let d = tempfile::tempdir().unwrap();
    let c = config(
        d.path(),
        "c.conf",
        "source = @M/markov6.txt\nnormalize_source = true\nchannel = symmetric 3 0.04\n",
    );
    let s = stdout(&run(&["inspect", c.to_str().unwrap()]));
    assert!(s.contains("delta(O)         0.060000"), "{s}");
}

#[test]
fn validation_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "bad.conf", "source = @M/markov4.txt\nchannel = noiseless 4\ncolour = red\n");
    assert_eq!(run(&["inspect", c.to_str().unwrap()]).status.code(), Some(2));
    let c = config(d.path(), "beta.conf", "source = @M/markov4.txt\nchannel = noiseless 4\nbeta = 1.5\n");
    assert_eq!(run(&["inspect", c.to_str().unwrap()]).status.code(), Some(2));
    let c = config(d.path(), "dims.conf", "source = @M/markov4.txt\nchannel = noiseless 4\ndistortion = @M/markov6.txt\n");
    assert_eq!(run(&["inspect", c.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["inspect", "/nonexistent.conf"]).status.code(), Some(1));
}

#[test]
fn unconverged_training_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "i.conf", &IID_RATE2.replace("max_steps = 500000", "max_steps = 1000"));
    let o = run(&["train", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let cfg = ExperimentConfig::load(&c).unwrap();
    assert!(checkpoint_path(&cfg, 1).exists());
    let o = run(&["train", c.to_str().unwrap(), "--allow-unconverged"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "i.conf", IID_RATE2);
    let cfg = ExperimentConfig::load(&c).unwrap();
    let (spec, set) = cfg.build().unwrap();
    let out = train(spec, set.clone(), &cfg.learning(1)).unwrap();
    let ck = Checkpoint::from_table(&out.table, &set, &cfg.hash(), cfg.scheme, 1, out.steps, out.converged);
    let p = d.path().join("x.ckpt");
    ck.save(&p).unwrap();
    let back = Checkpoint::load(&p).unwrap().to_table(&set, cfg.v0).unwrap();
    let mut a: Vec<_> = out.table.visited_pairs().map(|(z, u, v, k)| (z, u, v.to_bits(), k)).collect();
    let mut b: Vec<_> = back.visited_pairs().map(|(z, u, v, k)| (z, u, v.to_bits(), k)).collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
    let first = fs::read_to_string(&p).unwrap();
    assert!(first.starts_with(&format!("#config_hash\t{}\n#steps\t{}\n", cfg.hash(), out.steps)));
}

#[test]
fn iid_rate2_end_to_end_matches_the_exhaustive_optimum() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "i.conf", IID_RATE2);
    let cs = c.to_str().unwrap();
    assert_eq!(run(&["train", cs, "--allow-unconverged"]).status.code(), Some(0));
    let o = run(&["eval", cs]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(run(&["baseline", cs]).status.code(), Some(0));

    let cfg = ExperimentConfig::load(&c).unwrap();
    let csv = zerodelay::results::results_path(&cfg.output_dir, &cfg.hash());
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], HEADER.join(","));
    let rows: Vec<Vec<&str>> = lines[1..].iter().map(|l| l.split(',').collect()).collect();
    let opt: f64 = rows.iter().find(|r| r[1] == "exhaustive").unwrap()[5].parse().unwrap();
    assert_eq!(opt, 0.3125);
    for r in rows.iter().filter(|r| r[1] == "window") {
        let v: f64 = r[5].parse().unwrap();
        assert!((v - opt).abs() <= 0.02 * opt, "{v} vs {opt}");
        assert_eq!(r[3], "2");
    }

    // same seeds again: identical rows appended
    assert_eq!(run(&["eval", cs]).status.code(), Some(0));
    let again = fs::read_to_string(&csv).unwrap();
    let again: Vec<&str> = again.lines().collect();
    assert_eq!(again.len(), lines.len() + 2);
    assert_eq!(&again[lines.len()..], &lines[1..3]);
}

#[test]
fn eval_refuses_a_checkpoint_from_another_config() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "i.conf", IID_RATE2);
    assert_eq!(run(&["train", c.to_str().unwrap(), "--allow-unconverged"]).status.code(), Some(0));
    let cfg = ExperimentConfig::load(&c).unwrap();
    let ckpt = checkpoint_path(&cfg, 1);
    let c2 = config(d.path(), "j.conf", &IID_RATE2.replace("beta = 0.9999", "beta = 0.99"));
    let o = run(&["eval", c2.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trained under config"));
}

#[test]
fn empty_seed_list_gives_header_only_csv() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "i.conf", &IID_RATE2.replace("seeds = 1, 2", "seeds ="));
    let cs = c.to_str().unwrap();
    assert_eq!(run(&["train", cs, "--allow-unconverged"]).status.code(), Some(0));
    assert_eq!(run(&["eval", cs]).status.code(), Some(0));
    let cfg = ExperimentConfig::load(&c).unwrap();
    let text = fs::read_to_string(zerodelay::results::results_path(&cfg.output_dir, &cfg.hash())).unwrap();
    assert_eq!(text, HEADER.join(",") + "\n");
}

#[test]
fn window_cache_key_mismatch_rebuilds() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "i.conf", IID_RATE2);
    let cfg = ExperimentConfig::load(&c).unwrap();
    let (spec, set) = cfg.build().unwrap();
    let key = window_key(&spec, &set, 1);
    assert_ne!(key, window_key(&spec, &set, 2));
    let path = cache_path(&cfg.output_dir, &key);
    save_window_cache(&path, "stale", &[(0, vec![1.0])]).unwrap();
    assert_eq!(load_window_cache(&path, &key).unwrap(), None);
    // eval still works: the table is rebuilt
    assert_eq!(run(&["train", c.to_str().unwrap(), "--allow-unconverged"]).status.code(), Some(0));
    assert!(load_window_cache(&path, &key).unwrap().is_some());
    save_window_cache(&path, "stale", &[]).unwrap();
    assert_eq!(run(&["eval", c.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn lattice_train_and_eval() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "m.conf", MARKOV4_LATTICE);
    let cfg = ExperimentConfig::load(&c).unwrap();
    let reports = commands::train(&cfg, None).unwrap();
    assert_eq!(reports.len(), 1);
    assert!(reports[0].checkpoint.with_extension("occ").exists());
    let (_, rows) = commands::eval(&cfg, &[]).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].avg_distortion > 0.0 && rows[0].fallback_rate <= 1.0);
    assert!(commands::train(&cfg, Some(5)).is_err());
}

#[test]
fn stability_and_loss_commands() {
    let d = tempfile::tempdir().unwrap();
    let c = config(d.path(), "m.conf", &MARKOV4_LATTICE.replace("n = 4", "n = 1, 2"));
    let cs = c.to_str().unwrap();
    let o = run(&["stability", cs, "--samples", "200", "--horizon", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.starts_with("alpha 0.333333"), "{s}");
    assert_eq!(s.lines().count(), 2 + 6);

    let o = run(&["loss-estimate", cs, "--samples", "100", "--horizon", "3", "--policies", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1 + 2 * 3);

    let o = run(&["stability", cs, "--mu", "0.5,0.5,0,0", "--nu", "delta:1"]);
    assert_eq!(o.status.code(), Some(2));
}
