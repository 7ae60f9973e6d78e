//! Printable and CSV output for search results, reports, audit pages and
//! error reports.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use crate::csvio;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Printable,
    Csv,
}

impl FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "printable" | "print" | "html" => Ok(Self::Printable),
            "csv" => Ok(Self::Csv),
            other => Err(Error::invalid(format!("unsupported export format `{other}`"))),
        }
    }
}

/// A rendered file, ready to be sent or saved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Document {
    pub content_type: &'static str,
    pub filename: String,
    pub body: String,
}

/// Tabular content with a title and a one-line description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub title: String,
    pub description: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// The text a value shows in a cell. Null is blank.
pub fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}\
td,th{border:1px solid #888;padding:2px 6px;text-align:left}thead{display:table-header-group}\
tr{page-break-inside:avoid}section{page-break-after:always}";

pub fn html_page(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{t}</title><style>{STYLE}</style></head>\n<body>\n<h1>{t}</h1>\n{body}</body></html>\n",
        t = escape_html(title)
    )
}

impl Table {
    pub fn to_csv(&self) -> String {
        csvio::write_records(&self.columns, self.rows.iter().map(|r| r.iter().map(cell)))
    }

    pub fn to_html(&self) -> String {
        let mut body = String::new();
        let _ = writeln!(body, "<p>{}</p>", escape_html(&self.description));
        let noun = if self.rows.len() == 1 { "match" } else { "matches" };
        let _ = writeln!(body, "<p class=\"count\">{} {noun}</p>", self.rows.len());
        if !self.rows.is_empty() {
            body.push_str("<table>\n<thead><tr>");
            for c in &self.columns {
                let _ = write!(body, "<th>{}</th>", escape_html(c));
            }
            body.push_str("</tr></thead>\n<tbody>\n");
            for row in &self.rows {
                body.push_str("<tr>");
                for v in row {
                    let _ = write!(body, "<td>{}</td>", escape_html(&cell(v)));
                }
                body.push_str("</tr>\n");
            }
            body.push_str("</tbody>\n</table>\n");
        }
        html_page(&self.title, &body)
    }

    pub fn render(&self, format: ExportFormat, stem: &str) -> Document {
        match format {
            ExportFormat::Csv => Document {
                content_type: "text/csv; charset=utf-8",
                filename: format!("{stem}.csv"),
                body: self.to_csv(),
            },
            ExportFormat::Printable => Document {
                content_type: "text/html; charset=utf-8",
                filename: format!("{stem}.html"),
                body: self.to_html(),
            },
        }
    }
}
