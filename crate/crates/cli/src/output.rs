use std::io::{self, Write};

use bgk_core::diagnostics::DiagnosticsRecord;

/// Shortest fixed-width form carrying 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn pair_label(i: usize, j: usize) -> String {
    if i < 10 && j < 10 {
        format!("residual_{i}{j}")
    } else {
        format!("residual_{i}_{j}")
    }
}

pub fn header(num_species: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for i in 1..=num_species {
        for q in ["rho", "ux", "uy", "uz", "T"] {
            cols.push(format!("{q}_{i}"));
        }
    }
    for q in ["qx_tot", "qy_tot", "qz_tot", "E_tot", "H", "S"] {
        cols.push(q.into());
    }
    for i in 1..=num_species {
        for j in i + 1..=num_species {
            cols.push(pair_label(i, j));
        }
    }
    cols
}

pub fn row(rec: &DiagnosticsRecord) -> Vec<String> {
    let mut cols = vec![fmt_float(rec.t)];
    for s in &rec.species {
        cols.extend([s.rho, s.u[0], s.u[1], s.u[2], s.temperature].map(fmt_float));
    }
    cols.extend(rec.total_momentum.map(fmt_float));
    cols.extend([rec.total_energy, rec.entropy, rec.dissipation].map(fmt_float));
    cols.extend(rec.pairs.iter().map(|p| fmt_float(p.residual)));
    cols
}

/// CSV time series; every row is flushed so a failed run leaves a readable prefix.
pub struct TimeseriesWriter<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> TimeseriesWriter<W> {
    pub fn new(mut out: W, num_species: usize) -> io::Result<Self> {
        let h = header(num_species);
        writeln!(out, "{}", h.join(","))?;
        out.flush()?;
        Ok(TimeseriesWriter { out, columns: h.len() })
    }

    pub fn write(&mut self, rec: &DiagnosticsRecord) -> io::Result<()> {
        let r = row(rec);
        if r.len() != self.columns {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("record has {} columns, header has {}", r.len(), self.columns),
            ));
        }
        writeln!(self.out, "{}", r.join(","))?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
