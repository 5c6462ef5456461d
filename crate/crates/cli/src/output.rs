//! CSV writers and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use qbattery_core::WorkSeries;
use serde::{Deserialize, Serialize};

/// Shortest exact-enough text: 17 significant digits, zero as `0`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Writes a header and rows; returns the number of data rows.
pub fn write_table<I>(path: &Path, header: &[&str], rows: I) -> io::Result<usize>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(header.join(",").as_bytes())?;
    w.write_all(b"\n")?;
    let mut n = 0;
    for row in rows {
        w.write_all(row.join(",").as_bytes())?;
        w.write_all(b"\n")?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

/// `t,work,power[,logneg]`.
pub fn write_series(path: &Path, series: &WorkSeries, logneg: Option<&[f64]>) -> io::Result<usize> {
    if series.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "empty series"));
    }
    if logneg.is_some_and(|l| l.len() != series.len()) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "log-negativity length mismatch"));
    }
    let mut header = vec!["t", "work", "power"];
    if logneg.is_some() {
        header.push("logneg");
    }
    let rows = (0..series.len()).map(|k| {
        let mut row = vec![
            fmt_num(series.times[k]),
            fmt_num(series.work[k]),
            series.power.as_ref().map(|p| fmt_num(p[k])).unwrap_or_else(|| "nan".into()),
        ];
        if let Some(l) = logneg {
            row.push(fmt_num(l[k]));
        }
        row
    });
    write_table(path, &header, rows)
}

/// Long format `t,<axis>,value`, axis-major. `None` cells are skipped.
pub fn write_grid(
    path: &Path,
    axis_name: &str,
    value_name: &str,
    axis: &[f64],
    times: &[f64],
    values: &[Vec<Option<f64>>],
) -> io::Result<usize> {
    let rows = axis.iter().zip(values).flat_map(|(a, row)| {
        times.iter().zip(row).filter_map(move |(t, v)| v.map(|v| vec![fmt_num(*t), fmt_num(*a), fmt_num(v)]))
    });
    write_table(path, &["t", axis_name, value_name], rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub kind: String,
    pub config: BTreeMap<String, String>,
    pub duration_s: f64,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
    /// Pass/fail for checking experiments.
    pub passed: Option<bool>,
    pub summary: serde_json::Value,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl Manifest {
    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> io::Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_NAME))?;
        serde_json::from_str(&text).map_err(io::Error::other)
    }
}

/// Output directory plus the inventory of what has been written to it.
pub struct OutputDir {
    pub dir: PathBuf,
    pub files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn record(&mut self, name: &str, rows: usize) {
        self.files.push(FileEntry { name: name.to_string(), rows });
    }

    pub fn series(&mut self, name: &str, series: &WorkSeries, logneg: Option<&[f64]>) -> io::Result<()> {
        let rows = write_series(&self.dir.join(name), series, logneg)?;
        self.record(name, rows);
        Ok(())
    }

    pub fn table<I>(&mut self, name: &str, header: &[&str], rows: I) -> io::Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let n = write_table(&self.dir.join(name), header, rows)?;
        self.record(name, n);
        Ok(())
    }

    pub fn grid(
        &mut self,
        name: &str,
        axis_name: &str,
        value_name: &str,
        axis: &[f64],
        times: &[f64],
        values: &[Vec<Option<f64>>],
    ) -> io::Result<()> {
        let n = write_grid(&self.dir.join(name), axis_name, value_name, axis, times, values)?;
        self.record(name, n);
        Ok(())
    }
}

/// Gnuplot script for every CSV listed in a manifest.
pub fn gnuplot_script(dir: &Path, manifest: &Manifest) -> io::Result<String> {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n");
    for f in &manifest.files {
        let header = std::fs::read_to_string(dir.join(&f.name))?.lines().next().unwrap_or("").to_string();
        let cols: Vec<&str> = header.split(',').collect();
        let stem = f.name.trim_end_matches(".csv");
        s.push_str(&format!("set output '{stem}.png'\nset xlabel '{}'\n", cols[0]));
        if cols.len() == 3 && cols[0] == "t" && f.name.starts_with("grid") {
            s.push_str(&format!(
                "set ylabel '{}'\nset view map\nsplot '{}' using 1:2:3 with points pointtype 5 palette notitle\nunset view\n",
                cols[1], f.name
            ));
        } else {
            let plots: Vec<String> = (2..=cols.len()).map(|c| format!("'{}' using 1:{c} with lines", f.name)).collect();
            s.push_str(&format!("plot {}\n", plots.join(", ")));
        }
    }
    Ok(s)
}
