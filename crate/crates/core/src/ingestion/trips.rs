use std::io::{Read, Write};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{format_timestamp, parse_timestamp};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

const COLUMNS: [&str; 9] = [
    "employee_id",
    "departure_time",
    "arrival_time",
    "origin_lat",
    "origin_lon",
    "dest_name",
    "dest_lat",
    "dest_lon",
    "payment",
];

/// Origins are compared to the workplace within this many degrees.
const ORIGIN_TOLERANCE_DEG: f64 = 1e-6;

/// One reimbursed ride from the workplace to a home destination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub employee_id: String,
    pub departure_time: NaiveDateTime,
    pub arrival_time: NaiveDateTime,
    pub origin: GeoPoint,
    pub destination_raw: String,
    pub destination: GeoPoint,
    pub payment: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowReject {
    /// 1-based line number in the source, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct TripParse {
    pub records: Vec<TripRecord>,
    pub rejects: Vec<RowReject>,
}

fn column_indices(headers: &csv::StringRecord) -> Result<[usize; 9]> {
    let mut idx = [0usize; 9];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MalformedHeader(format!("missing column {name:?}")))?;
    }
    Ok(idx)
}

fn num(field: &str, name: &str) -> std::result::Result<f64, String> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("unparsable {name}: {field:?}"))
}

fn parse_row(
    row: &csv::StringRecord,
    idx: &[usize; 9],
    workplace: GeoPoint,
) -> std::result::Result<TripRecord, String> {
    let get = |i: usize| row.get(idx[i]).unwrap_or("");
    let ts = |i: usize| {
        parse_timestamp(get(i)).ok_or_else(|| format!("unparsable {}: {:?}", COLUMNS[i], get(i)))
    };
    let employee_id = get(0).trim().to_string();
    if employee_id.is_empty() {
        return Err("empty employee_id".into());
    }
    let departure_time = ts(1)?;
    let arrival_time = ts(2)?;
    let origin = GeoPoint::new(num(get(3), "origin_lat")?, num(get(4), "origin_lon")?);
    let destination_raw = get(5).trim().to_string();
    let destination = GeoPoint::new(num(get(6), "dest_lat")?, num(get(7), "dest_lon")?);
    let payment = num(get(8), "payment")?;

    if arrival_time < departure_time {
        return Err("arrival_time < departure_time".into());
    }
    if (origin.lat - workplace.lat).abs() > ORIGIN_TOLERANCE_DEG
        || (origin.lon - workplace.lon).abs() > ORIGIN_TOLERANCE_DEG
    {
        return Err(format!(
            "origin ({}, {}) differs from workplace ({}, {})",
            origin.lat, origin.lon, workplace.lat, workplace.lon
        ));
    }
    if !destination.is_valid() {
        return Err(format!(
            "destination out of range: ({}, {})",
            destination.lat, destination.lon
        ));
    }
    if payment < 0.0 {
        return Err(format!("negative payment {payment}"));
    }
    Ok(TripRecord {
        employee_id,
        departure_time,
        arrival_time,
        origin,
        destination_raw,
        destination,
        payment,
    })
}

/// Parses a trips CSV. Rows that fail validation land in
/// [`TripParse::rejects`] with their line number; a bad header is fatal.
pub fn parse_trips<R: Read>(source: R, workplace: GeoPoint) -> Result<TripParse> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?
        .clone();
    let idx = column_indices(&headers)?;

    let mut out = TripParse::default();
    let mut row = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line = row.position().map_or(line, |p| p.line());
                if row.len() < headers.len() {
                    out.rejects.push(RowReject {
                        line,
                        reason: format!("expected {} fields, found {}", headers.len(), row.len()),
                    });
                    continue;
                }
                match parse_row(&row, &idx, workplace) {
                    Ok(rec) => out.records.push(rec),
                    Err(reason) => out.rejects.push(RowReject { line, reason }),
                }
            }
            Err(e) => out.rejects.push(RowReject {
                line: e.position().map_or(line, |p| p.line()),
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Origin of the first data row, used when the workplace is not given
/// explicitly.
pub fn first_origin<R: Read>(source: R) -> Result<Option<GeoPoint>> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?
        .clone();
    let idx = column_indices(&headers)?;
    for row in reader.records() {
        let row = row?;
        let lat = num(row.get(idx[3]).unwrap_or(""), "origin_lat");
        let lon = num(row.get(idx[4]).unwrap_or(""), "origin_lon");
        if let (Ok(lat), Ok(lon)) = (lat, lon) {
            return Ok(Some(GeoPoint::new(lat, lon)));
        }
    }
    Ok(None)
}

pub fn write_trips<W: Write>(sink: W, records: &[TripRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record([
            r.employee_id.clone(),
            format_timestamp(r.departure_time),
            format_timestamp(r.arrival_time),
            r.origin.lat.to_string(),
            r.origin.lon.to_string(),
            r.destination_raw.clone(),
            r.destination.lat.to_string(),
            r.destination.lon.to_string(),
            r.payment.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
