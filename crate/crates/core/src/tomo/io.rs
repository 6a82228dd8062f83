use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Basis, MeasurementRecord, TomographyInput};
use crate::error::{invalid, Result};

/// One line of the count interchange CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsRow {
    pub input_label: String,
    pub basis: Basis,
    pub n_plus: u64,
    pub n_minus: u64,
}

/// Groups rows by label, keeping labels in order of first appearance.
pub fn read_counts_csv<R: Read>(reader: R) -> Result<Vec<(String, TomographyInput)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut groups: Vec<(String, Vec<MeasurementRecord>)> = Vec::new();
    for row in rdr.deserialize() {
        let row: CountsRow = row?;
        let rec = MeasurementRecord::new(row.basis, row.n_plus, row.n_minus);
        match groups.iter_mut().find(|(l, _)| *l == row.input_label) {
            Some((_, v)) => v.push(rec),
            None => groups.push((row.input_label, vec![rec])),
        }
    }
    if groups.is_empty() {
        return Err(invalid("count file has no rows"));
    }
    groups
        .into_iter()
        .map(|(label, recs)| {
            let input = TomographyInput::new(recs).map_err(|e| invalid(format!("input '{label}': {e}")))?;
            Ok((label, input))
        })
        .collect()
}

pub fn write_counts_csv<W: Write>(writer: W, data: &[(String, TomographyInput)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for (label, input) in data {
        for r in input.records() {
            wtr.serialize(CountsRow {
                input_label: label.clone(),
                basis: r.basis,
                n_plus: r.n_plus,
                n_minus: r.n_minus,
            })?;
        }
    }
    wtr.flush()?;
    Ok(())
}
