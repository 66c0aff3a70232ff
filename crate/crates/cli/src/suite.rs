use std::path::{Path, PathBuf};

use rayon::prelude::*;

use lctrace::check::check_trace;
use lctrace::suite::random_quartic;
use lctrace::trace::Algorithm;
use lctrace::{Error, Result};

use crate::manifest::RunManifest;
use crate::{execute, exit_code, termination_name, EXIT_CAP, EXIT_ERROR, EXIT_OK};

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

/// Writes `count` random instances with second-order manifests into `dir`.
pub fn generate(dir: &Path, count: usize, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let s = seed.wrapping_add(i as u64);
        let n = 1 + i % 3;
        let stem = format!("quartic-{s}-{n}d");
        let inst = random_quartic(s, n)?;
        std::fs::write(dir.join(format!("{stem}.json")), inst.to_json_string() + "\n")?;
        let mut m = RunManifest::new(format!("{stem}.json").into(), Algorithm::SecondOrder);
        m.trace = Some(format!("{stem}.trace.jsonl").into());
        m.summary = Some(format!("{stem}.summary.json").into());
        m.seed = s;
        let path = dir.join(format!("{stem}{MANIFEST_SUFFIX}"));
        m.write(&path)?;
        out.push(path);
    }
    Ok(out)
}

fn manifests(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(MANIFEST_SUFFIX))
        })
        .collect();
    out.sort();
    Ok(out)
}

struct RunLine {
    name: String,
    code: u8,
    text: String,
}

fn run_one(path: &Path) -> RunLine {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = name.trim_end_matches(MANIFEST_SUFFIX).to_string();
    let result = RunManifest::read(path).and_then(|m| execute(&m));
    match result {
        Ok(out) => {
            let s = out.trace.summary.as_ref().expect("finished runs carry a summary");
            let report = check_trace(&out.trace);
            let code = if report.passed() {
                exit_code(&s.termination)
            } else {
                EXIT_ERROR
            };
            let mut text = format!(
                "{} iterations={} solves={} f={:.9e} check={}",
                termination_name(&s.termination),
                s.iterations,
                s.subproblem_solves,
                s.final_f,
                if report.passed() { "pass" } else { "fail" }
            );
            for f in report.failures() {
                text.push_str(&format!(" [{}]", f.title));
            }
            RunLine { name, code, text }
        }
        Err(e) => RunLine {
            name,
            code: EXIT_ERROR,
            text: format!("error: {e}"),
        },
    }
}

pub fn cmd_suite(dir: &Path, jobs: usize, count: Option<usize>, seed: u64) -> u8 {
    if let Some(count) = count {
        if let Err(e) = generate(dir, count, seed) {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    }
    let paths = match manifests(dir) {
        Ok(p) if p.is_empty() => {
            eprintln!("error: no *{MANIFEST_SUFFIX} files in {}", dir.display());
            return EXIT_ERROR;
        }
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}", Error::InvalidConfig(e.to_string()));
            return EXIT_ERROR;
        }
    };
    let lines: Vec<RunLine> = pool.install(|| paths.par_iter().map(|p| run_one(p)).collect());
    for l in &lines {
        println!("{:<28} {}", l.name, l.text);
    }
    let errors = lines.iter().filter(|l| l.code == EXIT_ERROR).count();
    let capped = lines.iter().filter(|l| l.code == EXIT_CAP).count();
    println!(
        "{} runs, {} errors, {} at the iteration cap",
        lines.len(),
        errors,
        capped
    );
    if errors > 0 {
        EXIT_ERROR
    } else if capped > 0 {
        EXIT_CAP
    } else {
        EXIT_OK
    }
}
