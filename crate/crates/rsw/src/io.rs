//! On-disk formats: run configuration (JSON), field snapshots (binary with a
//! JSON header), the time-series CSV, and gnuplot scripts for the standard
//! figures. All float text output uses full-precision scientific notation so
//! repeated runs produce byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acoustic::RayConfig;
use crate::diag::SeriesRow;
use crate::error::{Result, RswError};
use crate::grid::GridSpec;
use crate::pulse::PulseSpec;
use crate::solver::SolverConfig;
use crate::state::FluidState;

const SNAPSHOT_MAGIC: &[u8; 8] = b"RSWSNAP1";

/// Initial data built from the 2D self-similar profile at a given width.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfSimilarSpec {
    pub delta: f64,
    #[serde(default = "default_n")]
    pub n: u32,
}

fn default_n() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagConfig {
    pub particles_n1: usize,
    pub particles_n2: usize,
    pub riemann: bool,
    /// Record a series row every this many steps (first and last always).
    pub series_every: usize,
}

impl Default for DiagConfig {
    fn default() -> Self {
        Self { particles_n1: 16, particles_n2: 8, riemann: true, series_every: 1 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
    /// Snapshot times in addition to snapshot_every (always the final state).
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    #[serde(default)]
    pub pulse: Option<PulseSpec>,
    #[serde(default)]
    pub selfsimilar: Option<SelfSimilarSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub rays: Option<RayConfig>,
    #[serde(default)]
    pub diagnostics: DiagConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| RswError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.pulse, &self.selfsimilar) {
            (Some(_), Some(_)) => {
                return Err(RswError::Schema(
                    "config sets both pulse and selfsimilar initial data".into(),
                ))
            }
            (None, None) => {
                return Err(RswError::Schema(
                    "config must set pulse or selfsimilar initial data".into(),
                ))
            }
            _ => {}
        }
        if let Some(p) = &self.pulse {
            p.validate()?;
        }
        if let Some(s) = &self.selfsimilar {
            if !(s.delta > 0.0 && s.delta <= 0.2) {
                return Err(RswError::Schema(format!(
                    "selfsimilar.delta must be in (0, 0.2], got {}",
                    s.delta
                )));
            }
        }
        self.solver.validate()?;
        Ok(())
    }

    /// Output directory: RSW_OUT_DIR env overrides the config value;
    /// defaults to "out".
    pub fn out_dir(&self) -> PathBuf {
        if let Ok(d) = std::env::var("RSW_OUT_DIR") {
            if !d.is_empty() {
                return PathBuf::from(d);
            }
        }
        PathBuf::from(self.output.dir.as_deref().unwrap_or("out"))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotHeader {
    grid: GridSpec,
    t: f64,
    fields: Vec<String>,
    dtype: String,
}

/// Write a fluid state as magic, little-endian u32 header length, JSON
/// header, then the h, v1, v2 arrays as raw little-endian f64.
pub fn save_snapshot(path: &Path, state: &FluidState) -> Result<()> {
    let header = SnapshotHeader {
        grid: state.grid().clone(),
        t: state.t,
        fields: vec!["h".into(), "v1".into(), "v2".into()],
        dtype: "f64le".into(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for field in [&state.h, &state.v1, &state.v2] {
        for &v in &field.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<FluidState> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| RswError::Format("snapshot truncated before magic".into()))?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(RswError::Format("bad snapshot magic".into()));
    }
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)
        .map_err(|_| RswError::Format("snapshot truncated in header length".into()))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)
        .map_err(|_| RswError::Format("snapshot truncated in header".into()))?;
    let header: SnapshotHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| RswError::Schema(format!("snapshot header: {e}")))?;
    if header.fields != ["h", "v1", "v2"] || header.dtype != "f64le" {
        return Err(RswError::Schema(format!(
            "unsupported snapshot layout: fields {:?} dtype {}",
            header.fields, header.dtype
        )));
    }
    let n = header.grid.n1 * header.grid.n2;
    let mut state = FluidState::rest(&header.grid);
    state.t = header.t;
    for field in [&mut state.h, &mut state.v1, &mut state.v2] {
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)
            .map_err(|_| RswError::Format("snapshot truncated in payload".into()))?;
        for (k, chunk) in buf.chunks_exact(8).enumerate() {
            field.values[k] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    Ok(state)
}

/// Append-style CSV writer with a fixed column order and full-precision
/// scientific formatting.
pub struct SeriesWriter {
    w: BufWriter<File>,
}

impl SeriesWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", SeriesRow::COLUMNS.join(","))?;
        Ok(Self { w })
    }

    pub fn write_row(&mut self, row: &SeriesRow) -> Result<()> {
        writeln!(
            self.w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            row.t,
            row.dt,
            row.mu_min,
            row.max_grad_v1,
            row.max_grad_h,
            row.max_grad_zeta,
            row.xi_drift,
            row.riemann_diff,
            row.mass,
            row.sup_lf_rho
        )?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Parse a series CSV back into rows (used by the analyze step).
pub fn load_series(path: &Path) -> Result<Vec<SeriesRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| RswError::Format("empty series file".into()))?;
    if header != SeriesRow::COLUMNS.join(",") {
        return Err(RswError::Schema(format!("unexpected series columns: {header}")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| RswError::Format(format!("series line {}: {e}", lineno + 2)))?;
        if vals.len() != SeriesRow::COLUMNS.len() {
            return Err(RswError::Format(format!(
                "series line {}: expected {} columns, got {}",
                lineno + 2,
                SeriesRow::COLUMNS.len(),
                vals.len()
            )));
        }
        rows.push(SeriesRow {
            t: vals[0],
            dt: vals[1],
            mu_min: vals[2],
            max_grad_v1: vals[3],
            max_grad_h: vals[4],
            max_grad_zeta: vals[5],
            xi_drift: vals[6],
            riemann_diff: vals[7],
            mass: vals[8],
            sup_lf_rho: vals[9],
        });
    }
    Ok(rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Emit gnuplot scripts next to the series file: inverse foliation density
/// minimum against the linear prediction 1 - (3/2) k t, and the gradient
/// history on log axes.
pub fn emit_plots(dir: &Path, slope_k: f64) -> Result<()> {
    let mu = format!(
        "set terminal pngcairo size 900,600\n\
         set output 'mu_min.png'\n\
         set datafile separator ','\n\
         set xlabel 't'\n\
         set ylabel 'mu_min'\n\
         set key left bottom\n\
         plot 'series.csv' using 1:3 with lines title 'mu_min', \\\n\
              1 - 1.5*{slope_k:.17e}*x with lines dashtype 2 title 'linear prediction'\n"
    );
    std::fs::write(dir.join("plot_mu.gp"), mu)?;
    let grad = "set terminal pngcairo size 900,600\n\
                set output 'gradients.png'\n\
                set datafile separator ','\n\
                set xlabel 't'\n\
                set ylabel 'max |d1 v1|'\n\
                set logscale y\n\
                plot 'series.csv' using 1:4 with lines title 'max grad v1', \\\n\
                     'series.csv' using 1:5 with lines title 'max grad h'\n"
        .to_string();
    std::fs::write(dir.join("plot_gradients.gp"), grad)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_state() -> FluidState {
        let g = GridSpec::new(24, 12, 0.0, 2.0, 1.0);
        let mut s = FluidState::rest(&g);
        s.t = 0.375;
        for (k, v) in s.h.values.iter_mut().enumerate() {
            *v = 1.0 + 0.01 * (k as f64).sin();
        }
        for (k, v) in s.v1.values.iter_mut().enumerate() {
            *v = 0.1 * (0.3 * k as f64).cos();
        }
        s
    }

    #[test]
    fn snapshot_roundtrip_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.rswsnap");
        let state = sample_state();
        save_snapshot(&path, &state).unwrap();
        let back = load_snapshot(&path).unwrap();
        assert_eq!(back.t.to_bits(), state.t.to_bits());
        for (a, b) in [
            (&back.h, &state.h),
            (&back.v1, &state.v1),
            (&back.v2, &state.v2),
        ] {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn snapshot_roundtrip_arbitrary_values(seed in any::<u64>()) {
            let g = GridSpec::new(8, 4, 0.0, 1.0, 1.0);
            let mut s = FluidState::rest(&g);
            let mut x = seed | 1;
            let mut next = || {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                (x as f64 / u64::MAX as f64) * 2.0 - 1.0
            };
            for v in s.h.values.iter_mut() { *v = 1.0 + 0.5 * next(); }
            for v in s.v1.values.iter_mut() { *v = next(); }
            for v in s.v2.values.iter_mut() { *v = next(); }
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.rswsnap");
            save_snapshot(&path, &s).unwrap();
            let back = load_snapshot(&path).unwrap();
            for (a, b) in s.h.values.iter().zip(&back.h.values) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            for (a, b) in s.v2.values.iter().zip(&back.v2.values) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn truncated_snapshot_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.rswsnap");
        save_snapshot(&path, &sample_state()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [3usize, 10, 40, bytes.len() - 5] {
            let trunc = dir.path().join("t.rswsnap");
            std::fs::write(&trunc, &bytes[..cut]).unwrap();
            match load_snapshot(&trunc) {
                Err(RswError::Format(_)) => {}
                other => panic!("cut {cut}: expected format error, got {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.rswsnap");
        std::fs::write(&path, b"NOTASNAPxxxxxxxxxxxxxxxx").unwrap();
        assert!(matches!(load_snapshot(&path), Err(RswError::Format(_))));
    }

    #[test]
    fn series_roundtrip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let row = SeriesRow {
            t: 0.1,
            dt: 1e-3,
            mu_min: 0.9,
            max_grad_v1: 1.5,
            max_grad_h: 1.4,
            max_grad_zeta: 0.2,
            xi_drift: 1e-9,
            riemann_diff: 3e-4,
            mass: 2.0000000001,
            sup_lf_rho: 0.05,
        };
        let mut bytes = Vec::new();
        for name in ["a.csv", "b.csv"] {
            let path = dir.path().join(name);
            let mut w = SeriesWriter::create(&path).unwrap();
            w.write_row(&row).unwrap();
            w.flush().unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(bytes[0], bytes[1]);
        let rows = load_series(&dir.path().join("a.csv")).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mass.to_bits(), row.mass.to_bits());
        assert_eq!(rows[0].t.to_bits(), row.t.to_bits());
    }

    #[test]
    fn run_config_rejects_unknown_fields() {
        let text = r#"{
            "grid": {"n1": 8, "n2": 4, "x1_min": 0.0, "x1_max": 1.0, "x2_period": 1.0},
            "selfsimilar": {"delta": 0.05},
            "bogus": 1
        }"#;
        let err = serde_json::from_str::<RunConfig>(text).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn run_config_requires_exactly_one_data_section() {
        let g = r#""grid": {"n1": 8, "n2": 4, "x1_min": 0.0, "x1_max": 1.0, "x2_period": 1.0}"#;
        let none: RunConfig = serde_json::from_str(&format!("{{{g}}}")).unwrap();
        assert!(none.validate().is_err());
        let one: RunConfig =
            serde_json::from_str(&format!(r#"{{{g}, "selfsimilar": {{"delta": 0.05}}}}"#))
                .unwrap();
        one.validate().unwrap();
        assert_eq!(one.selfsimilar.as_ref().unwrap().n, 1);
    }

    #[test]
    fn plot_emission_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        emit_plots(dir.path(), 1.0).unwrap();
        let first = std::fs::read(dir.path().join("plot_mu.gp")).unwrap();
        emit_plots(dir.path(), 1.0).unwrap();
        let second = std::fs::read(dir.path().join("plot_mu.gp")).unwrap();
        assert_eq!(first, second);
        assert!(String::from_utf8(first).unwrap().contains("1 - 1.5*"));
    }
}
