//! CSV and JSON artifacts plus the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use projflow_core::RunRecord;
use serde::Serialize;

use crate::config::RunConfig;

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Writes artifacts under one directory and remembers their names.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn open(&mut self, name: &str) -> anyhow::Result<File> {
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        if !self.files.iter().any(|n| n == name) {
            self.files.push(name.to_string());
        }
        Ok(f)
    }

    /// One row per recorded sample of every trajectory, in trajectory order.
    pub fn write_trajectories(&mut self, name: &str, records: &[RunRecord]) -> anyhow::Result<()> {
        let n_semi = records.first().and_then(|r| r.samples.first()).map_or(0, |s| s.seminorms.len());
        let mut w = csv::Writer::from_writer(BufWriter::new(self.open(name)?));
        let mut header: Vec<String> = ["trajectory", "step", "t", "logr", "median", "skeleton_median", "fk_integrand", "fk_cumulative"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((0..n_semi).map(|j| format!("seminorm_{j}")));
        header.push("log_G".into());
        w.write_record(&header)?;
        for rec in records {
            for s in &rec.samples {
                let mut row = vec![
                    rec.trajectory.to_string(),
                    s.step.to_string(),
                    s.t.to_string(),
                    s.logr.to_string(),
                    s.median.to_string(),
                    opt(s.skeleton_median),
                    opt(s.fk_integrand),
                    opt(s.fk_cumulative),
                ];
                row.extend(s.seminorms.iter().map(|x| x.to_string()));
                row.push(opt(s.log_g));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Skeleton jump table of every trajectory.
    pub fn write_jumps(&mut self, name: &str, records: &[RunRecord]) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(self.open(name)?));
        w.write_record([
            "trajectory",
            "i",
            "T_i",
            "T_next",
            "M_i",
            "M_next",
            "event",
            "marker",
            "padding_exit",
            "dilution_exit",
            "dissipation_exit",
            "w_seminorm",
            "w_seminorm_after",
            "median_at_jump",
            "clamped",
        ])?;
        for rec in records {
            for j in &rec.jumps {
                w.write_record([
                    rec.trajectory.to_string(),
                    j.i.to_string(),
                    j.t_start.to_string(),
                    j.t_next.to_string(),
                    j.m_start.to_string(),
                    j.m_next.to_string(),
                    format!("{:?}", j.event),
                    j.marker.symbol().to_string(),
                    format!("{:?}", j.padding_exit),
                    format!("{:?}", j.dilution_exit),
                    format!("{:?}", j.dissipation_exit),
                    j.w_seminorm_before.to_string(),
                    j.w_seminorm_after.to_string(),
                    j.median_at_jump.to_string(),
                    j.clamped.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Generic CSV table from a header and stringified rows.
    pub fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(self.open(name)?));
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut f = BufWriter::new(self.open(name)?);
        serde_json::to_writer_pretty(&mut f, value)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub scenario: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub master_seed: u64,
    pub trajectory_seeds: Vec<u64>,
    pub wall_clock_secs: f64,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(cfg: &RunConfig, seeds: Vec<u64>, wall_clock_secs: f64, artifacts: &Artifacts, warnings: Vec<String>) -> Self {
        let mut files = artifacts.files().to_vec();
        files.push("manifest.json".into());
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: cfg.scenario.name().to_string(),
            config: serde_json::from_str(&cfg.canonical_json()).expect("canonical json parses"),
            config_hash: cfg.hash(),
            master_seed: cfg.master_seed,
            trajectory_seeds: seeds,
            wall_clock_secs,
            artifacts: files,
            warnings,
        }
    }

    pub fn write(&self, artifacts: &mut Artifacts) -> anyhow::Result<()> {
        artifacts.write_json("manifest.json", self)
    }
}
