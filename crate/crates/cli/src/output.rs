use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a value's canonical JSON form.
pub fn json_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(serde_json::to_string(value).expect("serializable").as_bytes())
}

/// Provenance carried by every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Header {
    pub config_sha256: String,
    pub certificate_sha256: String,
}

impl Header {
    pub fn comment_lines(&self, prefix: &str) -> String {
        format!("{prefix} config_sha256={}\n{prefix} certificate_sha256={}\n", self.config_sha256, self.certificate_sha256)
    }
}

/// Writes files under one directory and remembers what was written.
pub struct OutputDir {
    root: PathBuf,
    header: Header,
    written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

impl OutputDir {
    pub fn create(root: &Path, header: Header) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), header, written: Vec::new() })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn set_header(&mut self, header: Header) {
        self.header = header;
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn put(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Text file with `#` header lines prepended.
    pub fn text(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let mut s = self.header.comment_lines("#");
        s.push_str(body);
        self.put(name, &s)
    }

    /// JSON object with a `header` field merged into the body's fields.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(&Wrapped { header: &self.header, body })
            .map_err(|e| CliError::internal("output", e))?;
        s.push('\n');
        self.put(name, &s)
    }

    pub fn svg(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        s.push_str(&format!(
            "<!-- config_sha256={} certificate_sha256={} -->\n",
            self.header.config_sha256, self.header.certificate_sha256
        ));
        s.push_str(body);
        self.put(name, &s)
    }
}

/// Two-column text body.
pub fn columns(names: [&str; 2], rows: &[(f64, f64)]) -> String {
    let mut s = format!("# {} {}\n", names[0], names[1]);
    for (a, b) in rows {
        let _ = writeln!(s, "{a} {b}");
    }
    s
}

/// One named curve of a log–log plot.
pub struct Curve<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: &'a [(f64, f64)],
}

/// Minimal log–log line plot.
pub fn loglog_svg(title: &str, curves: &[Curve<'_>]) -> String {
    let (w, h, pad) = (720.0, 480.0, 60.0);
    let pts = curves.iter().flat_map(|c| c.points.iter()).filter(|p| p.0 > 0.0 && p.1 > 0.0);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.0.log10());
        x1 = x1.max(p.0.log10());
        y0 = y0.min(p.1.log10());
        y1 = y1.max(p.1.log10());
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x.log10() - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y.log10() - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{pad}\" y=\"30\" font-size=\"16\">{title}</text>");
    let _ = writeln!(
        s,
        "<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let _ = writeln!(s, "<text x=\"{pad}\" y=\"{}\" font-size=\"12\">x1 in [1e{x0:.2}, 1e{x1:.2}], log scale</text>", h - 20.0);
    for (i, c) in curves.iter().enumerate() {
        let path: Vec<String> = c
            .points
            .iter()
            .filter(|p| p.0 > 0.0 && p.1 > 0.0)
            .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)))
            .collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>", c.color, path.join(" "));
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{}\">{}</text>",
            w - pad - 200.0,
            pad + 18.0 * (i + 1) as f64,
            c.color,
            c.label
        );
    }
    s.push_str("</svg>\n");
    s
}
