//! File formats written by the CLI. Every file goes through
//! [`write_atomic`], so a failed run never leaves a half-written file.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use gpts::bench::metrics::{average_regret, error_series, quantile_sorted};
use gpts::bench::{CampaignResult, Objective};
use gpts::engine::RunOutcome;

use crate::CliError;

/// Writes `contents` to a temporary sibling of `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| CliError::Io(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn trace_file_name(replica: usize) -> String {
    format!("trace-{replica:03}.csv")
}

/// Trace CSV: one row per chosen point, excluding the uniform seed point.
/// Stage-level columns repeat on every row of their stage; `regret_prefix`
/// is the average regret up to and including the row's point.
pub fn trace_csv(run: &RunOutcome, obj: &Objective) -> Result<String, CliError> {
    let trace = &run.trace;
    let d = trace.domain.dim();
    let errors = error_series(trace, obj).map_err(CliError::from)?;
    let regret = average_regret(trace, obj);
    let mut out = String::from("stage");
    for i in 0..d {
        write!(out, ",x{i}").unwrap();
    }
    out.push_str(",y,branch,error_metric,regret_prefix,lambda_min_over_t,lambda_max_over_t,zeta_hat");
    for i in 0..d {
        write!(out, ",ell_hat_{i}").unwrap();
    }
    out.push_str(",sigma_hat\n");
    let mut k = 0;
    for (s, err) in trace.stages.iter().zip(&errors) {
        for ((x, y), origin) in s.points.iter().zip(&s.observations).zip(&s.origins) {
            write!(out, "{}", s.stage).unwrap();
            for v in x {
                write!(out, ",{v}").unwrap();
            }
            write!(
                out,
                ",{y},{},{err},{},{},{},{}",
                origin.as_str(),
                regret[k],
                s.lambda_min_over_t,
                s.lambda_max_over_t,
                s.hyper.zeta
            )
            .unwrap();
            for l in &s.hyper.length_scales {
                write!(out, ",{l}").unwrap();
            }
            writeln!(out, ",{}", s.hyper.noise_sigma).unwrap();
            k += 1;
        }
    }
    Ok(out)
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "inf".to_string(), |s| s.to_string())
}

fn fmt_point(x: &[f64]) -> String {
    x.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// `key=value` summary of a campaign.
pub fn summary_text(config_text: &str, obj: &Objective, c: &CampaignResult) -> String {
    let mut out = String::new();
    out.push_str(config_text);
    writeln!(out, "true_argmax={}", fmt_point(obj.true_argmax())).unwrap();
    for (i, r) in c.replicas.iter().enumerate() {
        writeln!(out, "replica.{i:03}.estimate={}", fmt_point(&r.estimate)).unwrap();
        writeln!(out, "replica.{i:03}.stages={}", r.trace.stages.len()).unwrap();
        writeln!(out, "replica.{i:03}.stopped={}", r.stopped).unwrap();
        writeln!(out, "replica.{i:03}.stages_to_threshold={}", fmt_opt(c.stages_to_threshold[i])).unwrap();
    }
    let m = c.median_stages_to_threshold();
    writeln!(out, "median_stages_to_threshold={}", if m.is_finite() { m.to_string() } else { "inf".into() }).unwrap();
    match &c.decay {
        Some(fit) => {
            writeln!(out, "decay.slope={}", fit.slope).unwrap();
            writeln!(out, "decay.intercept={}", fit.intercept).unwrap();
            writeln!(out, "decay.r_squared={}", fit.r_squared).unwrap();
        }
        None => out.push_str("decay.slope=nan\ndecay.intercept=nan\ndecay.r_squared=nan\n"),
    }
    for q in &c.quantiles {
        writeln!(out, "median_error.{:03}={}", q.stage, q.q50).unwrap();
    }
    out
}

/// `# stage q25 q50 q75`.
pub fn decay_dat(c: &CampaignResult) -> String {
    let mut out = String::from("# stage q25 q50 q75\n");
    for q in &c.quantiles {
        writeln!(out, "{} {} {} {}", q.stage, q.q25, q.q50, q.q75).unwrap();
    }
    out
}

/// `# index q25 q50 q75` of average regret over chosen points; shorter
/// replicas carry their last value.
pub fn regret_dat(c: &CampaignResult) -> String {
    let mut out = String::from("# index q25 q50 q75\n");
    let len = c.regret.iter().map(Vec::len).max().unwrap_or(0);
    for i in 0..len {
        let mut col: Vec<f64> = c.regret.iter().filter_map(|r| r.get(i).or(r.last()).copied()).collect();
        col.sort_by(f64::total_cmp);
        writeln!(
            out,
            "{} {} {} {}",
            i + 1,
            quantile_sorted(&col, 0.25),
            quantile_sorted(&col, 0.5),
            quantile_sorted(&col, 0.75)
        )
        .unwrap();
    }
    out
}

/// Posterior-mean surfaces of one run at its refit stages, one column per
/// stage. `None` for runs without recorded surfaces.
pub fn surface_dat(run: &RunOutcome) -> Option<String> {
    let snaps: Vec<_> = run.trace.stages.iter().filter_map(|s| s.surface.as_ref().map(|sn| (s.stage, sn))).collect();
    let xs = &snaps.first()?.1.xs;
    let mut out = String::from("# x");
    for (stage, _) in &snaps {
        write!(out, " stage_{stage}").unwrap();
    }
    out.push('\n');
    for (j, x) in xs.iter().enumerate() {
        write!(out, "{x}").unwrap();
        for (_, sn) in &snaps {
            write!(out, " {}", sn.means[j]).unwrap();
        }
        out.push('\n');
    }
    Some(out)
}

/// Writes the plot-data files of one campaign into `dir`, each name
/// suffixed with `tag`. Returns the written paths.
pub fn write_plot_files(dir: &Path, tag: &str, c: &CampaignResult) -> Result<Vec<PathBuf>, CliError> {
    create_dir(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<(), CliError> {
        let p = dir.join(name);
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
        Ok(())
    };
    put(format!("decay{tag}.dat"), decay_dat(c))?;
    put(format!("regret{tag}.dat"), regret_dat(c))?;
    if let Some(s) = c.replicas.first().and_then(surface_dat) {
        put(format!("surface{tag}.dat"), s)?;
    }
    Ok(written)
}
