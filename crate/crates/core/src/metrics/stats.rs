use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// Mean of `a - b` greater than zero.
    Greater,
}

/// Paired Student's t-test over the topics both score maps share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub t_statistic: f64,
    pub df: usize,
    pub n: usize,
    pub mean_difference: f64,
    /// Two-tailed p-value.
    pub p_value: f64,
}

impl PairedTest {
    pub fn p(&self, alternative: Alternative) -> f64 {
        match alternative {
            Alternative::TwoSided => self.p_value,
            Alternative::Greater if self.t_statistic >= 0.0 => self.p_value / 2.0,
            Alternative::Greater => 1.0 - self.p_value / 2.0,
        }
    }
}

pub fn paired_test(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<PairedTest> {
    let diffs: Vec<f64> = a.iter().filter_map(|(topic, x)| b.get(topic).map(|y| x - y)).collect();
    let n = diffs.len();
    if n < 2 {
        return Err(Error::invalid(
            "paired test",
            format!("need at least 2 common topics, got {n}"),
        ));
    }
    let df = n - 1;
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / df as f64;
    let sd = var.sqrt();

    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(PairedTest {
            t_statistic: 0.0,
            df,
            n,
            mean_difference: 0.0,
            p_value: 1.0,
        });
    }
    if sd == 0.0 {
        return Ok(PairedTest {
            t_statistic: f64::INFINITY.copysign(mean),
            df,
            n,
            mean_difference: mean,
            p_value: 0.0,
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(PairedTest {
        t_statistic: t,
        df,
        n,
        mean_difference: mean,
        p_value: p,
    })
}
