//! The CSV tokenizer shared by the importers and the exporters.
//!
//! UTF-8, comma separated, double-quote quoting, CRLF or LF line ends.

use crate::error::{Error, Issue, Result};

/// Upload ceiling for any CSV payload, in bytes.
pub const MAX_UPLOAD_BYTES: usize = 2 * 1024 * 1024;

/// One data row, with its 1-based line number in the file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvRow {
    pub line: usize,
    pub fields: Vec<String>,
}

impl CsvRow {
    pub fn get(&self, i: usize) -> &str {
        self.fields.get(i).map(String::as_str).unwrap_or("")
    }
}

/// Splits text into records without any header handling.
pub fn read_records(text: &str) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    reader
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| Error::InvalidInput(vec![Issue::general(e.to_string())]))
        })
        .collect()
}

/// 1-based physical line of the record starting at `byte`. The reader's own
/// count skips blank lines, and its offsets point before them.
fn line_at(text: &str, byte: u64) -> usize {
    let bytes = text.as_bytes();
    let mut end = (byte as usize).min(bytes.len());
    while end < bytes.len() && matches!(bytes[end], b'\r' | b'\n') {
        end += 1;
    }
    bytes[..end].iter().filter(|&&b| b == b'\n').count() + 1
}

/// Parses an upload whose first row must be exactly `header` (compared
/// case-insensitively, ignoring surrounding blanks). Every later row must have
/// `header.len()` fields. All problems are collected before failing.
pub fn parse_upload(bytes: &[u8], header: &[&str]) -> Result<Vec<CsvRow>> {
    if bytes.len() > MAX_UPLOAD_BYTES {
        return Err(Error::TooLarge {
            size: bytes.len(),
            limit: MAX_UPLOAD_BYTES,
        });
    }
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::InvalidInput(vec![Issue::general(format!("not UTF-8: {e}"))]))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut issues = Vec::new();
    let mut saw_header = false;
    for rec in reader.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| line_at(text, p.byte()));
                issues.push(Issue::at(line, e.to_string()));
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| line_at(text, p.byte()));
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if !saw_header {
            saw_header = true;
            let got: Vec<String> = rec.iter().map(|f| f.trim().to_ascii_lowercase()).collect();
            if got != header {
                issues.push(Issue::at(line, format!("header must be `{}`", header.join(","))));
                break;
            }
            continue;
        }
        if rec.len() != header.len() {
            issues.push(Issue::at(line, format!("expected {} fields, found {}", header.len(), rec.len())));
            continue;
        }
        rows.push(CsvRow {
            line,
            fields: rec.iter().map(|f| f.trim().to_string()).collect(),
        });
    }
    if !saw_header {
        issues.push(Issue::general(format!("missing header `{}`", header.join(","))));
    }
    if issues.is_empty() {
        Ok(rows)
    } else {
        Err(Error::InvalidInput(issues))
    }
}

/// Writes a header and rows.
pub fn write_records<I, R>(header: &[String], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    w.write_record(header).expect("csv header");
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        w.write_record(&row).expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf-8 csv")
}
