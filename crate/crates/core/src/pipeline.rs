//! Batch pipeline: simulate cubes, track them, evaluate against truth.
//!
//! All stages run inside an explicitly sized worker pool. Every parallel
//! section maps into index-ordered buffers and reduces serially, so results
//! are identical for any worker count; the `TBD_GLMB_THREADS` environment
//! variable caps the pool when no explicit size is given.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::RunConfig;
use crate::cube_io;
use crate::error::{Result, TrackingError};
use crate::filter::{extract_estimates_detailed, TbdGlmbFilter};
use crate::metrics::{label_consistency, ospa, EstimateRecord, TruthRecord};
use crate::rfs::Label;
use crate::sim::{render_sequence, truth_states};

pub const TRUTH_HEADER: &str = "k,id,x,y,xdot,ydot,theta";
pub const TRACKS_HEADER: &str =
    "k,label_birth_time,label_birth_index,x,y,xdot,ydot,theta,hypothesis_weight";
pub const METRICS_HEADER: &str = "k,ospa,card_est,card_truth,card_error,label_consistency";

/// Worker pool sized from the explicit argument, else `TBD_GLMB_THREADS`,
/// else the rayon default.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = threads.or_else(|| {
        std::env::var("TBD_GLMB_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    });
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = n {
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| TrackingError::Contract(format!("thread pool: {e}")))
}

/// One output row of the tracker.
#[derive(Debug, Clone)]
pub struct TrackRecord {
    pub k: usize,
    pub label: Label,
    pub x: f64,
    pub y: f64,
    pub xdot: f64,
    pub ydot: f64,
    pub theta: f64,
    pub hypothesis_weight: f64,
}

pub struct SimulateOutput {
    pub cubes_path: PathBuf,
    pub truth_path: PathBuf,
    pub n_frames: usize,
}

/// Render the configured scenario and write the cube stream plus truth CSV.
pub fn simulate(config: &RunConfig, out_dir: &Path, threads: Option<usize>) -> Result<SimulateOutput> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let pool = thread_pool(threads)?;
    let sim = config.sim_config();
    let cubes = pool.install(|| render_sequence(&config.targets, &sim));

    let cubes_path = out_dir.join("cubes.tbdc");
    cube_io::write_stream(&cubes_path, &cubes)?;

    let truth_path = out_dir.join("truth.csv");
    let mut w = BufWriter::new(File::create(&truth_path)?);
    writeln!(w, "{TRUTH_HEADER}")?;
    for k in 0..sim.n_frames {
        for row in truth_states(&config.targets, &sim, k) {
            let s = row.state;
            writeln!(w, "{},{},{},{},{},{},{}", k, row.id, s[0], s[2], s[1], s[3], s[4])?;
        }
    }
    w.flush()?;
    Ok(SimulateOutput {
        cubes_path,
        truth_path,
        n_frames: sim.n_frames,
    })
}

pub struct TrackOutput {
    pub records: Vec<TrackRecord>,
    pub summary_path: PathBuf,
}

/// Run the filter over a cube stream and write the track CSV plus a JSON run
/// summary (per-frame cardinality, hypothesis count, wall time).
pub fn track(
    config: &RunConfig,
    cubes_path: &Path,
    out_csv: &Path,
    max_frames: Option<usize>,
    threads: Option<usize>,
) -> Result<TrackOutput> {
    config.validate()?;
    let pool = thread_pool(threads)?;
    let file = File::open(cubes_path).map_err(|e| {
        TrackingError::CubeFormat(format!("cannot open {}: {e}", cubes_path.display()))
    })?;
    let mut reader = BufReader::new(file);

    let mut filter = TbdGlmbFilter::new(
        config.sensor_model(),
        config.motion_params(),
        config.birth_params(),
        config.filter_params(),
        config.seed,
    );

    if let Some(parent) = out_csv.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(out_csv)?);
    writeln!(w, "{TRACKS_HEADER}")?;

    let mut records = Vec::new();
    let mut frame_stats = Vec::new();
    let started = Instant::now();
    let mut k = 0usize;
    while let Some(cube) = cube_io::read_cube(&mut reader)? {
        if let Some(limit) = max_frames {
            if k >= limit {
                break;
            }
        }
        if cube.grid != config.grid {
            return Err(TrackingError::CubeFormat(format!(
                "cube grid at frame {k} does not match the configured sensor grid"
            )));
        }
        let frame_start = Instant::now();
        pool.install(|| filter.step(&cube))?;
        let (estimates, hyp_weight) = extract_estimates_detailed(&filter.density);
        for (label, s) in &estimates {
            let rec = TrackRecord {
                k,
                label: *label,
                x: s[0],
                y: s[2],
                xdot: s[1],
                ydot: s[3],
                theta: s[4],
                hypothesis_weight: hyp_weight,
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                rec.k,
                rec.label.birth_time,
                rec.label.birth_index,
                rec.x,
                rec.y,
                rec.xdot,
                rec.ydot,
                rec.theta,
                rec.hypothesis_weight
            )?;
            records.push(rec);
        }
        frame_stats.push((
            k,
            estimates.len(),
            filter.density.hypotheses.len(),
            frame_start.elapsed().as_secs_f64() * 1e3,
        ));
        k += 1;
    }
    w.flush()?;

    let summary_path = summary_path_for(out_csv);
    let mut json = String::new();
    let _ = writeln!(json, "{{");
    let _ = writeln!(json, "  \"frames\": {},", frame_stats.len());
    let _ = writeln!(
        json,
        "  \"total_wall_time_s\": {:.3},",
        started.elapsed().as_secs_f64()
    );
    let _ = writeln!(json, "  \"per_frame\": [");
    for (i, (k, card, hyps, ms)) in frame_stats.iter().enumerate() {
        let comma = if i + 1 == frame_stats.len() { "" } else { "," };
        let _ = writeln!(
            json,
            "    {{\"k\": {k}, \"cardinality\": {card}, \"hypotheses\": {hyps}, \"wall_time_ms\": {ms:.3}}}{comma}"
        );
    }
    let _ = writeln!(json, "  ]");
    let _ = writeln!(json, "}}");
    std::fs::write(&summary_path, json)?;

    Ok(TrackOutput {
        records,
        summary_path,
    })
}

pub fn summary_path_for(out_csv: &Path) -> PathBuf {
    let stem = out_csv
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "tracks".into());
    out_csv.with_file_name(format!("{stem}_summary.json"))
}

pub struct EvalOutput {
    pub mean_ospa: f64,
    pub label_consistency: f64,
    pub n_frames: usize,
}

/// Join tracks with truth and write per-frame OSPA and cardinality error plus
/// the whole-run label consistency (repeated per row; the schema is fixed).
pub fn evaluate(
    tracks_csv: &Path,
    truth_csv: &Path,
    out_csv: &Path,
    ospa_cutoff: f64,
    ospa_order: f64,
    gate: f64,
) -> Result<EvalOutput> {
    let tracks = read_tracks_csv(tracks_csv)?;
    // Multiple truth rows per (k, id) are reflection centers of one object.
    let truth = crate::metrics::group_truth_by_id(&read_truth_csv(truth_csv)?);

    let estimates: Vec<EstimateRecord> = tracks
        .iter()
        .map(|r| EstimateRecord {
            k: r.k,
            label: r.label,
            x: r.x,
            y: r.y,
        })
        .collect();
    let consistency = label_consistency(&estimates, &truth, gate);

    let n_frames = truth
        .iter()
        .map(|t| t.k + 1)
        .chain(tracks.iter().map(|t| t.k + 1))
        .max()
        .unwrap_or(0);

    if let Some(parent) = out_csv.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(out_csv)?);
    writeln!(w, "{METRICS_HEADER}")?;
    let mut ospa_sum = 0.0;
    for k in 0..n_frames {
        let est: Vec<(f64, f64)> = tracks
            .iter()
            .filter(|r| r.k == k)
            .map(|r| (r.x, r.y))
            .collect();
        let tru: Vec<(f64, f64)> = truth
            .iter()
            .filter(|t| t.k == k)
            .map(|t| (t.x, t.y))
            .collect();
        let d = ospa(&est, &tru, ospa_cutoff, ospa_order);
        ospa_sum += d;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            k,
            d,
            est.len(),
            tru.len(),
            est.len() as i64 - tru.len() as i64,
            consistency
        )?;
    }
    w.flush()?;
    Ok(EvalOutput {
        mean_ospa: if n_frames > 0 { ospa_sum / n_frames as f64 } else { 0.0 },
        label_consistency: consistency,
        n_frames,
    })
}

/// simulate → track → eval, sharing one output directory.
pub fn run_all(config: &RunConfig, out_dir: &Path, threads: Option<usize>) -> Result<EvalOutput> {
    let sim = simulate(config, out_dir, threads)?;
    let tracks_csv = out_dir.join("tracks.csv");
    track(config, &sim.cubes_path, &tracks_csv, None, threads)?;
    evaluate(
        &tracks_csv,
        &sim.truth_path,
        &out_dir.join("metrics.csv"),
        config.ospa_cutoff,
        config.ospa_order,
        config.association_gate,
    )
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<TruthRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != TRUTH_HEADER {
                return Err(TrackingError::Contract(format!(
                    "unexpected truth CSV header `{line}`"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(TrackingError::Contract(format!(
                "truth CSV line {} has {} fields",
                i + 1,
                f.len()
            )));
        }
        rows.push(TruthRecord {
            k: parse_field(f[0], path, i)?,
            id: parse_field(f[1], path, i)?,
            x: parse_field(f[2], path, i)?,
            y: parse_field(f[3], path, i)?,
        });
    }
    Ok(rows)
}

pub fn read_tracks_csv(path: &Path) -> Result<Vec<TrackRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != TRACKS_HEADER {
                return Err(TrackingError::Contract(format!(
                    "unexpected tracks CSV header `{line}`"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(TrackingError::Contract(format!(
                "tracks CSV line {} has {} fields",
                i + 1,
                f.len()
            )));
        }
        rows.push(TrackRecord {
            k: parse_field(f[0], path, i)?,
            label: Label::new(parse_field(f[1], path, i)?, parse_field(f[2], path, i)?),
            x: parse_field(f[3], path, i)?,
            y: parse_field(f[4], path, i)?,
            xdot: parse_field(f[5], path, i)?,
            ydot: parse_field(f[6], path, i)?,
            theta: parse_field(f[7], path, i)?,
            hypothesis_weight: parse_field(f[8], path, i)?,
        });
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(s: &str, path: &Path, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| {
        TrackingError::Contract(format!(
            "{}: line {}: cannot parse `{}`",
            path.display(),
            line + 1,
            s
        ))
    })
}
