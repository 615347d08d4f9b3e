use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::MetricError;

/// One row of the results file: a participant's signed-off forecast for one
/// product plus session-level timings and survey answers.
///
/// Metrics are empty when undefined (for instance a model forecast that
/// exactly matched the truth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub session_id: String,
    pub worker_id: String,
    pub treatment: String,
    pub product_index: usize,
    pub product_id: String,
    pub av: Option<f64>,
    pub rmae: Option<f64>,
    pub mape: Option<f64>,
    pub mape_excluded: usize,
    /// Model rMAE against simple exponential smoothing on this product.
    pub model_vs_ses_rmae: Option<f64>,
    pub view_seconds: f64,
    pub completion_seconds: Option<f64>,
    pub duplicate: bool,
    pub bonus_cents: u32,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub s3: Option<f64>,
    pub s4: Option<f64>,
    pub s5: Option<f64>,
    pub comment: String,
}

impl ResultRecord {
    pub fn survey(&self) -> Option<[f64; 5]> {
        Some([self.s1?, self.s2?, self.s3?, self.s4?, self.s5?])
    }
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<ResultRecord>, MetricError> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(MetricError::from)).collect()
}

pub fn write_results<W: Write>(writer: W, records: &[ResultRecord]) -> Result<(), MetricError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_empty_cells() {
        let rec = ResultRecord {
            session_id: "S000001".into(),
            worker_id: "w1".into(),
            treatment: "TA".into(),
            product_index: 2,
            product_id: "FOODS_3_001".into(),
            av: Some(0.25),
            rmae: None,
            mape: Some(0.1),
            mape_excluded: 1,
            model_vs_ses_rmae: Some(0.8),
            view_seconds: 12.5,
            completion_seconds: None,
            duplicate: false,
            bonus_cents: 60,
            s1: Some(4.0),
            s2: Some(5.0),
            s3: None,
            s4: Some(1.0),
            s5: Some(7.0),
            comment: "fine, thanks".into(),
        };
        let mut buf = Vec::new();
        write_results(&mut buf, std::slice::from_ref(&rec)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("session_id,worker_id,treatment,product_index,product_id,av,rmae,"));
        let back = read_results(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec]);
        assert_eq!(back[0].survey(), None);
    }
}
