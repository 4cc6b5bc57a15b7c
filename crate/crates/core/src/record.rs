//! Trajectory records produced by solver runs.

use serde::{Deserialize, Serialize};

/// Scalars recorded at iterate `k`.
///
/// `gamma` and `batch_size` describe the step the schedule prescribes *at*
/// this iterate (the one about to be taken); `f` and `grad_norm_sq` are exact
/// for finitely supported populations and absent for generative ones;
/// `w2_ref` is the distance to the reference barycenter when one was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepScalars {
    pub k: usize,
    pub gamma: f64,
    pub batch_size: usize,
    pub f: Option<f64>,
    pub grad_norm_sq: Option<f64>,
    pub w2_ref: Option<f64>,
}

/// A measure snapshot taken at iterate `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<M> {
    pub k: usize,
    pub measure: M,
}

/// Full trajectory of a solver run.
///
/// The scalar series has exactly `executed steps + 1` entries, the initial
/// point included. Everything except `wall_time_secs` is a deterministic
/// function of `(seed, config, population, initial point)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord<M> {
    pub family: String,
    pub schedule: String,
    pub seed: u64,
    pub steps_executed: usize,
    pub scalars: Vec<StepScalars>,
    pub snapshots: Vec<Snapshot<M>>,
    pub final_measure: M,
    pub wall_time_secs: f64,
}

impl<M> RunRecord<M> {
    pub fn final_scalars(&self) -> &StepScalars {
        self.scalars.last().expect("record holds the initial point")
    }

    /// Writes the scalar series as CSV with the fixed column set
    /// `k,gamma,F,grad_norm_sq,w2_ref`. Floats use the shortest
    /// round-trippable representation; absent values yield empty fields.
    pub fn write_scalar_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,gamma,F,grad_norm_sq,w2_ref")?;
        for row in &self.scalars {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
            writeln!(
                w,
                "{},{:?},{},{},{}",
                row.k,
                row.gamma,
                opt(row.f),
                opt(row.grad_norm_sq),
                opt(row.w2_ref)
            )?;
        }
        Ok(())
    }

    pub fn scalar_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_scalar_csv(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_values_exactly() {
        let record = RunRecord {
            family: "univariate".into(),
            schedule: "constant(gamma=0.5)".into(),
            seed: 3,
            steps_executed: 1,
            scalars: vec![
                StepScalars {
                    k: 0,
                    gamma: 0.5,
                    batch_size: 1,
                    f: Some(0.1 + 0.2),
                    grad_norm_sq: Some(1.0 / 3.0),
                    w2_ref: None,
                },
                StepScalars {
                    k: 1,
                    gamma: 0.5,
                    batch_size: 1,
                    f: Some(0.0),
                    grad_norm_sq: Some(0.0),
                    w2_ref: Some(2.4),
                },
            ],
            snapshots: Vec::new(),
            final_measure: (),
            wall_time_secs: 0.0,
        };
        let csv = record.scalar_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("k,gamma,F,grad_norm_sq,w2_ref"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0].parse::<usize>().unwrap(), 0);
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(row[3].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(row[4], "");
    }
}
