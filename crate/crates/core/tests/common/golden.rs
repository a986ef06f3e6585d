//! Golden-file runner for the `tensorkit` binary.
//!
//! Cases run in order inside one scratch directory, so later cases can read
//! what earlier ones wrote. `@in/` expands to the fixture directory and
//! `@out/` to the scratch directory. Set `TENSORKIT_UPDATE_GOLDEN=1` to
//! rewrite the expected files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Case {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub exit: i32,
    /// Files written to `@out/` that must match `expected/`.
    pub outputs: &'static [&'static str],
}

const fn ok(name: &'static str, args: &'static [&'static str], outputs: &'static [&'static str]) -> Case {
    Case {
        name,
        args,
        exit: 0,
        outputs,
    }
}

const fn fails(name: &'static str, args: &'static [&'static str], exit: i32) -> Case {
    Case {
        name,
        args,
        exit,
        outputs: &[],
    }
}

pub const CASES: &[Case] = &[
    ok("import-csv", &["import-csv", "--in", "@in/rank1.csv", "--shape", "2,3,4", "--out", "@out/x.htb"], &["x.htb"]),
    ok(
        "decompose-cpd",
        &["decompose", "--method", "cpd", "--rank", "1", "--in", "@out/x.htb", "--out", "@out/cpd.htb", "--report", "@out/report.json"],
        &["cpd.htb", "report.json"],
    ),
    ok(
        "decompose-cpd-rand",
        &["decompose", "--method", "cpd-rand", "--rank", "1", "--sample-size", "4", "--seed", "3", "--in", "@out/x.htb", "--out", "@out/cpd-rand.htb"],
        &["cpd-rand.htb"],
    ),
    ok(
        "decompose-hosvd",
        &["decompose", "--method", "hosvd", "--rank", "1,2,2", "--in", "@out/x.htb", "--out", "@out/hosvd.htb", "--report", "@out/hosvd-report.json", "--plot-kind", "line"],
        &["hosvd.htb", "hosvd-report.json"],
    ),
    ok(
        "decompose-hooi",
        &["decompose", "--method", "hooi", "--rank", "1,1,1", "--in", "@out/x.htb", "--out", "@out/hooi.htb"],
        &["hooi.htb"],
    ),
    ok(
        "decompose-tt",
        &["decompose", "--method", "tt", "--eps", "0.01", "--in", "@out/x.htb", "--out", "@out/tt.htb"],
        &["tt.htb"],
    ),
    ok("reconstruct", &["reconstruct", "--in", "@out/cpd.htb", "--out", "@out/rebuilt.htb"], &["rebuilt.htb"]),
    ok("residual", &["residual", "--data", "@out/x.htb", "--form", "@out/tt.htb"], &[]),
    ok("import-side", &["import-csv", "--in", "@in/side.csv", "--shape", "2,3", "--out", "@out/side.htb"], &["side.htb"]),
    ok(
        "fuse-cmtf",
        &["fuse", "--method", "cmtf", "--rank", "1", "--tensor", "@out/x.htb", "--side", "@out/side.htb", "--out-dir", "@out/cmtf"],
        &["cmtf/cpd.htb", "cmtf/side-loadings.htb"],
    ),
    ok("import-slice0", &["import-csv", "--in", "@in/slice0.csv", "--shape", "4,3", "--out", "@out/s0.htb"], &[]),
    ok("import-slice1", &["import-csv", "--in", "@in/slice1.csv", "--shape", "5,3", "--out", "@out/s1.htb"], &[]),
    ok("import-slice2", &["import-csv", "--in", "@in/slice2.csv", "--shape", "3,3", "--out", "@out/s2.htb"], &[]),
    ok(
        "fuse-parafac2",
        &["fuse", "--method", "parafac2", "--rank", "1", "--slices", "@out/s0.htb,@out/s1.htb,@out/s2.htb", "--out-dir", "@out/pf2"],
        &["pf2/u-0.htb", "pf2/u-1.htb", "pf2/u-2.htb", "pf2/s.htb", "pf2/v.htb"],
    ),
    ok("import-samples", &["import-csv", "--in", "@in/samples.csv", "--shape", "8,3,3", "--out", "@out/samples.htb"], &[]),
    ok(
        "classify-train-lsstm",
        &["classify", "train", "--model", "lsstm", "--data", "@out/samples.htb", "--labels", "@in/labels.csv", "--out", "@out/lsstm.htb"],
        &["lsstm.htb"],
    ),
    ok(
        "classify-predict-lsstm",
        &["classify", "predict", "--model", "lsstm", "--model-file", "@out/lsstm.htb", "--data", "@out/samples.htb"],
        &[],
    ),
    ok(
        "classify-train-tel",
        &["classify", "train", "--model", "tel", "--rank", "1", "--data", "@out/samples.htb", "--labels", "@in/labels.csv", "--out", "@out/tel.htb"],
        &["tel.htb"],
    ),
    ok(
        "classify-predict-tel",
        &["classify", "predict", "--model", "tel", "--model-file", "@out/tel.htb", "--data", "@out/samples.htb"],
        &[],
    ),
    ok("import-normal", &["import-csv", "--in", "@in/normal.csv", "--shape", "10,2,3", "--out", "@out/normal-samples.htb"], &[]),
    ok("stats-fit", &["stats", "fit", "--data", "@out/normal-samples.htb", "--out", "@out/normal.htb"], &["normal.htb"]),
    ok("stats-logpdf", &["stats", "logpdf", "--model", "@out/normal.htb", "--in", "@out/normal-samples.htb"], &[]),
    ok(
        "stats-sample",
        &["stats", "sample", "--model", "@out/normal.htb", "--count", "3", "--seed", "11", "--out", "@out/draws.htb"],
        &["draws.htb"],
    ),
    ok("stats-dof-ratio", &["stats", "dof-ratio", "--shape", "2,2,2"], &[]),
    // usage errors
    fails("missing-rank", &["decompose", "--method", "cpd", "--in", "@out/x.htb", "--out", "@out/never.htb"], 2),
    fails("unknown-method", &["decompose", "--method", "svd", "--rank", "1", "--in", "@out/x.htb", "--out", "@out/never.htb"], 2),
    fails("rank-too-large", &["decompose", "--method", "hosvd", "--rank", "3,3,3", "--in", "@out/x.htb", "--out", "@out/never.htb"], 2),
    fails("eps-with-cpd", &["decompose", "--method", "cpd", "--rank", "1", "--eps", "0.1", "--in", "@out/x.htb", "--out", "@out/never.htb"], 2),
    // data errors
    fails("csv-count", &["import-csv", "--in", "@in/rank1.csv", "--shape", "5,5", "--out", "@out/never.htb"], 3),
    fails("missing-file", &["reconstruct", "--in", "@out/does-not-exist.htb", "--out", "@out/never.htb"], 3),
    fails("kind-mismatch", &["reconstruct", "--in", "@out/x.htb", "--out", "@out/never.htb"], 3),
    fails("wrong-model-kind", &["classify", "predict", "--model", "tel", "--model-file", "@out/lsstm.htb", "--data", "@out/samples.htb"], 3),
    fails("bad-labels", &["classify", "train", "--model", "lsstm", "--data", "@out/samples.htb", "--labels", "@in/samples.csv", "--out", "@out/never.htb"], 3),
    // numeric failure: identical samples give a singular covariance
    ok("import-constant", &["import-csv", "--in", "@in/constant.csv", "--shape", "2,2,3", "--out", "@out/constant.htb"], &[]),
    fails("singular-fit", &["stats", "fit", "--data", "@out/constant.htb", "--out", "@out/never.htb"], 4),
];

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn expand(arg: &str, out: &Path) -> String {
    let inputs = golden_dir().join("inputs");
    arg.replace("@in/", &format!("{}/", inputs.display()))
        .replace("@out/", &format!("{}/", out.display()))
}

fn compare(expected: &Path, actual: &[u8], update: bool, failures: &mut Vec<String>, what: &str) {
    if update {
        fs::create_dir_all(expected.parent().unwrap()).unwrap();
        fs::write(expected, actual).unwrap();
        return;
    }
    match fs::read(expected) {
        Ok(want) if want == actual => {}
        Ok(_) => failures.push(format!("{what}: differs from {}", expected.display())),
        Err(e) => failures.push(format!("{what}: cannot read {}: {e}", expected.display())),
    }
}

/// Re-serialises an `.htb` output and checks it is byte-identical.
fn check_round_trip(path: &Path, bytes: &[u8], failures: &mut Vec<String>) {
    let text = String::from_utf8_lossy(bytes);
    match tensorkit::io::from_htb_str(&text).and_then(|v| tensorkit::io::to_htb_string(&v)) {
        Ok(again) if again.as_bytes() == bytes => {}
        Ok(_) => failures.push(format!("{}: not canonical after load/save", path.display())),
        Err(e) => failures.push(format!("{}: does not load: {e}", path.display())),
    }
}

/// Runs every case in a fresh directory; returns one message per failure.
pub fn run_cases(work: &Path) -> Vec<String> {
    let update = std::env::var_os("TENSORKIT_UPDATE_GOLDEN").is_some();
    let expected = golden_dir().join("expected");
    let mut failures = Vec::new();
    for case in CASES {
        let args: Vec<String> = case.args.iter().map(|a| expand(a, work)).collect();
        let out = Command::new(env!("CARGO_BIN_EXE_tensorkit"))
            .args(&args)
            .output()
            .expect("binary runs");
        let code = out.status.code().unwrap_or(-1);
        if code != case.exit {
            failures.push(format!(
                "{}: exit {code}, expected {} (stderr: {})",
                case.name,
                case.exit,
                String::from_utf8_lossy(&out.stderr).trim()
            ));
            continue;
        }
        if case.exit == 0 {
            let stdout = String::from_utf8_lossy(&out.stdout);
            if stdout.lines().count() != 1 || serde_json::from_str::<serde_json::Value>(&stdout).is_err() {
                failures.push(format!("{}: stdout is not one JSON line: {stdout:?}", case.name));
            }
            compare(&expected.join(format!("{}.stdout", case.name)), &out.stdout, update, &mut failures, case.name);
        } else {
            if !out.stdout.is_empty() {
                failures.push(format!("{}: failure wrote to stdout", case.name));
            }
            if out.stderr.is_empty() {
                failures.push(format!("{}: no diagnostic on stderr", case.name));
            }
        }
        for file in case.outputs {
            let produced = work.join(file);
            let bytes = match fs::read(&produced) {
                Ok(b) => b,
                Err(e) => {
                    failures.push(format!("{}: missing output {file}: {e}", case.name));
                    continue;
                }
            };
            if file.ends_with(".htb") {
                check_round_trip(&produced, &bytes, &mut failures);
            }
            compare(&expected.join(file), &bytes, update, &mut failures, case.name);
        }
    }
    failures
}
