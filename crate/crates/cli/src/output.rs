//! Result files. Floats are written with 17 significant digits so every
//! value round-trips exactly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use swjko::diagnostics::RadiusStats;
use swjko::{Atoms, Measure, ParticleCloud, Trajectory};

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// `step, t, energy, sw_gap, wall_ms`; row `k` describes `mu_k`, and its
/// gap and wall time belong to the step that produced it (zero for `k = 0`).
pub fn write_trace(path: &Path, traj: &Trajectory<f64>) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["step", "t", "energy", "sw_gap", "wall_ms"])?;
    for (k, &f) in traj.energy_trace.iter().enumerate() {
        let (gap, ms) = if k == 0 {
            (0.0, 0.0)
        } else {
            (
                traj.sw_gap_trace.get(k - 1).copied().unwrap_or(f64::NAN),
                traj.step_times.get(k - 1).map_or(f64::NAN, |d| d.as_secs_f64() * 1e3),
            )
        };
        w.write_record([k.to_string(), num(traj.time(k)), num(f), num(gap), format!("{ms:.3}")])?;
    }
    w.flush()
}

/// One row per atom: `x_1..x_d`, plus `weight` for grids, whose cell
/// volume goes in a leading comment line.
pub fn write_measure(path: &Path, mu: &Measure<f64>) -> io::Result<()> {
    let mut f = create(path)?;
    let d = match mu {
        Measure::Cloud(c) => c.dim(),
        Measure::Grid(g) => g.dim(),
    };
    if let Measure::Grid(g) = mu {
        writeln!(f, "# cell_volume={}", num(g.cell_volume()))?;
    }
    let mut w = csv::Writer::from_writer(f);
    let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
    if matches!(mu, Measure::Grid(_)) {
        header.push("weight".into());
    }
    w.write_record(&header)?;
    match mu {
        Measure::Cloud(c) => {
            for i in 0..c.len() {
                w.write_record(c.point(i).iter().map(|&x| num(x)))?;
            }
        }
        Measure::Grid(g) => {
            for (i, &wt) in g.weight_slice().iter().enumerate() {
                w.write_record(g.point(i).iter().map(|&x| num(x)).chain(std::iter::once(num(wt))))?;
            }
        }
    }
    w.flush()
}

pub fn write_cloud(path: &Path, c: &ParticleCloud<f64>) -> io::Result<()> {
    write_measure(path, &Measure::Cloud(c.clone()))
}

/// Two-column `name, value` table.
pub fn write_table(path: &Path, rows: &[(String, f64)]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["name", "value"])?;
    for (k, v) in rows {
        w.write_record([k.clone(), num(*v)])?;
    }
    w.flush()
}

pub fn radius_rows(r: &RadiusStats<f64>) -> Vec<(String, f64)> {
    let mut rows = vec![
        ("mean".to_string(), r.mean),
        ("std".to_string(), r.std),
        ("min".to_string(), r.min),
        ("max".to_string(), r.max),
    ];
    rows.extend(r.quantiles.iter().map(|(l, v)| (format!("q{l}"), *v)));
    rows
}

pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())?;
    f.flush()
}

/// Reads a numeric CSV of samples, one row per point. `#` lines are
/// comments; a first row that does not parse as numbers is a header.
pub fn read_samples(path: &Path) -> Result<ParticleCloud<f64>, String> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) if v.iter().all(|x| x.is_finite()) => rows.push(v),
            Ok(_) => return Err(format!("{}: row {} has a non-finite value", path.display(), i + 1)),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(format!("{}: row {}: {e}", path.display(), i + 1)),
        }
    }
    if rows.is_empty() {
        return Err(format!("{}: no samples", path.display()));
    }
    let d = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != d) {
        return Err(format!("{}: row {} has {} columns, expected {d}", path.display(), bad + 1, rows[bad].len()));
    }
    ParticleCloud::from_rows(&rows).map_err(|e| format!("{}: {e}", path.display()))
}
