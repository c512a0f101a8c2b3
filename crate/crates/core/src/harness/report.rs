//! CSV serialization of run reports. Reports hold only deterministic
//! quantities; wall-clock timings go to a separate file so that reruns of
//! the same config give byte-identical reports.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub sinr_target_db: Option<f64>,
    /// Realized SINR of the simulated data.
    pub sinr_db: Option<f64>,
    pub inr_db: Option<f64>,
    pub rfi_scale: f64,
    pub k_hat: usize,
    pub omegas: Vec<f64>,
    /// `1 / sigma` from the RFI fit.
    pub lambda: f64,
    pub nre_proposed_db: f64,
    pub nre_di_db: f64,
    pub fi_admm_iters: usize,
    pub fi_stalled: bool,
    pub mm_iters: usize,
    pub er_lambda: f64,
    pub er_mm_iters: usize,
    pub er_admm_iters: usize,
    pub er_stalled: bool,
    pub er_degenerate: bool,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub simulate: f64,
    pub di: f64,
    pub rfi: f64,
    pub recover: f64,
    pub total: f64,
}

pub const REPORT_HEADER: &str = "seed,sinr_target_db,sinr_db,inr_db,rfi_scale,k_hat,omegas,lambda,\
nre_proposed_db,nre_di_db,fi_admm_iters,fi_stalled,mm_iters,er_lambda,er_mm_iters,er_admm_iters,\
er_stalled,er_degenerate,rng";

pub const TIMINGS_HEADER: &str = "seed,simulate_s,di_s,rfi_s,recover_s,total_s";

pub const PLOT_HEADER: &str = "inr_db,sinr_db,nre_proposed_db,nre_di_db";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl RunReport {
    pub fn csv_row(&self) -> String {
        let omegas = self.omegas.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(";");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            opt(self.sinr_target_db),
            opt(self.sinr_db),
            opt(self.inr_db),
            self.rfi_scale,
            self.k_hat,
            omegas,
            self.lambda,
            self.nre_proposed_db,
            self.nre_di_db,
            self.fi_admm_iters,
            self.fi_stalled,
            self.mm_iters,
            self.er_lambda,
            self.er_mm_iters,
            self.er_admm_iters,
            self.er_stalled,
            self.er_degenerate,
            crate::signal::RNG_NAME,
        )
    }
}

pub fn reports_csv<'a>(reports: impl IntoIterator<Item = &'a RunReport>) -> String {
    let mut s = format!("{REPORT_HEADER}\n");
    for r in reports {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

pub fn timings_csv<'a>(rows: impl IntoIterator<Item = (u64, &'a Timings)>) -> String {
    let mut s = format!("{TIMINGS_HEADER}\n");
    for (seed, t) in rows {
        let _ = writeln!(s, "{seed},{:.6},{:.6},{:.6},{:.6},{:.6}", t.simulate, t.di, t.rfi, t.recover, t.total);
    }
    s
}

/// NRE against realized SINR, one line per run.
pub fn plot_csv<'a>(reports: impl IntoIterator<Item = &'a RunReport>) -> String {
    let mut s = format!("{PLOT_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            opt(r.inr_db),
            opt(r.sinr_target_db.or(r.sinr_db)),
            r.nre_proposed_db,
            r.nre_di_db
        );
    }
    s
}
