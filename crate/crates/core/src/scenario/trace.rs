use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Trace CSV header, in column order.
pub const TRACE_COLUMNS: [&str; 25] = [
    "t", "U_true", "omega_f_true", "omega_r_true", "U_meas", "omega_f_meas", "omega_r_meas", "U_est",
    "omega_f_est", "omega_r_est", "B_est", "C_est", "D_est", "E_est", "D_min", "D_max", "kappa_f",
    "mu_f_true", "torque", "J", "P_pred", "N_eff", "resampled", "retro", "lock",
];

/// One control step. Estimator-only columns are NaN for the baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub truth: [f64; 3],
    pub meas: [f64; 3],
    pub est: [f64; 3],
    /// `[B, C, D, E]`.
    pub theta_est: [f64; 4],
    pub d_min: f64,
    pub d_max: f64,
    pub kappa_f: f64,
    pub mu_f_true: f64,
    pub torque: f64,
    pub j: f64,
    pub p_pred: f64,
    pub n_eff: f64,
    pub resampled: bool,
    pub retro: bool,
    pub lock: bool,
    /// Peak friction of the active surface (not written to CSV).
    pub d_true: f64,
}

impl TraceRow {
    pub fn to_record(&self) -> Vec<String> {
        let mut v: Vec<f64> = vec![self.t];
        v.extend(self.truth);
        v.extend(self.meas);
        v.extend(self.est);
        v.extend(self.theta_est);
        v.extend([self.d_min, self.d_max, self.kappa_f, self.mu_f_true, self.torque, self.j, self.p_pred, self.n_eff]);
        let mut rec: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
        rec.extend([self.resampled, self.retro, self.lock].map(|b| if b { "1" } else { "0" }.to_string()));
        rec
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        // shortest representation that round-trips
        format!("{x:?}")
    }
}

/// Per-step history of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_COLUMNS)?;
        for row in &self.rows {
            w.write_record(row.to_record())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
