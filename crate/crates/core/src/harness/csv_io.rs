use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, Terminator, WriterBuilder};

use super::BerRecord;
use crate::error::HarnessError;

pub const CSV_HEADER: &str = "snr_db,sir_db,party,strategy,bits_total,bit_errors,ber,mean_amp_rel_err,trials";

/// Writes records with the fixed header and LF line endings.
pub fn write_csv<W: Write>(records: &[BerRecord], writer: W) -> Result<(), csv::Error> {
    let mut w = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[BerRecord], path: &Path) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Config("no records to write".into()));
    }
    let file = File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_owned(),
        source,
    })?;
    write_csv(records, file).map_err(|source| HarnessError::Csv {
        path: path.to_owned(),
        source,
    })
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<BerRecord>, csv::Error> {
    ReaderBuilder::new().from_reader(reader).deserialize().collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<BerRecord>, HarnessError> {
    let file = File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_records(file).map_err(|source| HarnessError::Csv {
        path: path.to_owned(),
        source,
    })
}
