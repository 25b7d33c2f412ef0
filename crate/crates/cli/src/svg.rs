//! Minimal static SVG rendering: polylines, bars, and smoothed area paths
//! (quadratic splines through midpoints). CSV stays the authoritative
//! artifact; these files are a convenience view of the same data.

pub struct Chart {
    width: f64,
    height: f64,
    margin: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    body: Vec<String>,
    deterministic: bool,
}

pub const SERIES_COLORS: [&str; 10] = [
    "#4c72b0", "#55a868", "#c44e52", "#8172b3", "#ccb974", "#64b5cd", "#8c8c8c", "#e58139",
    "#3b7a57", "#a23b72",
];

impl Chart {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), deterministic: bool) -> Chart {
        let (mut x_range, mut y_range) = (x_range, y_range);
        if x_range.0 == x_range.1 {
            x_range.1 += 1.0;
        }
        if y_range.0 == y_range.1 {
            y_range.1 += 1.0;
        }
        Chart {
            width: 720.0,
            height: 420.0,
            margin: 50.0,
            x_range,
            y_range,
            body: Vec::new(),
            deterministic,
        }
    }

    fn tx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.margin + (x - lo) / (hi - lo) * (self.width - 2.0 * self.margin)
    }

    fn ty(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.height - self.margin - (y - lo) / (hi - lo) * (self.height - 2.0 * self.margin)
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], color: &str) {
        if points.is_empty() {
            return;
        }
        let pts: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.tx(x), self.ty(y)))
            .collect();
        self.body.push(format!(
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        ));
    }

    /// Quadratic spline through segment midpoints, optionally closed down to
    /// the y-baseline as a translucent area.
    pub fn smooth_path(&mut self, points: &[(f64, f64)], color: &str, area: bool) {
        if points.len() < 2 {
            return;
        }
        let p: Vec<(f64, f64)> = points
            .iter()
            .map(|&(x, y)| (self.tx(x), self.ty(y)))
            .collect();
        let mut d = format!("M {:.2} {:.2}", p[0].0, p[0].1);
        for i in 1..p.len() - 1 {
            let mid = ((p[i].0 + p[i + 1].0) / 2.0, (p[i].1 + p[i + 1].1) / 2.0);
            d.push_str(&format!(
                " Q {:.2} {:.2} {:.2} {:.2}",
                p[i].0, p[i].1, mid.0, mid.1
            ));
        }
        let last = p[p.len() - 1];
        d.push_str(&format!(" L {:.2} {:.2}", last.0, last.1));
        if area {
            let y0 = self.ty(self.y_range.0);
            d.push_str(&format!(
                " L {:.2} {:.2} L {:.2} {:.2} Z",
                last.0, y0, p[0].0, y0
            ));
            self.body.push(format!(
                r#"<path d="{d}" fill="{color}" fill-opacity="0.35" stroke="{color}" stroke-width="1"/>"#
            ));
        } else {
            self.body.push(format!(
                r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
            ));
        }
    }

    /// Bar centered on `x` with the given data-space width.
    pub fn bar(&mut self, x: f64, value: f64, width: f64, color: &str) {
        let x0 = self.tx(x - width / 2.0);
        let x1 = self.tx(x + width / 2.0);
        let y0 = self.ty(self.y_range.0.max(0.0));
        let y1 = self.ty(value);
        self.body.push(format!(
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
            x0,
            y1.min(y0),
            (x1 - x0).abs(),
            (y0 - y1).abs()
        ));
    }

    pub fn label(&mut self, x: f64, y: f64, text: &str) {
        self.body.push(format!(
            r#"<text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif" text-anchor="middle">{}</text>"#,
            self.tx(x),
            self.ty(y),
            escape(text)
        ));
    }

    pub fn legend(&mut self, entries: &[(String, String)]) {
        for (i, (name, color)) in entries.iter().enumerate() {
            let y = 16.0 + 14.0 * i as f64;
            self.body.push(format!(
                r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#,
                self.width - self.margin - 130.0,
                y
            ));
            self.body.push(format!(
                r#"<text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif">{}</text>"#,
                self.width - self.margin - 115.0,
                y + 9.0,
                escape(name)
            ));
        }
    }

    pub fn finish(self, title: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            self.width, self.height, self.width, self.height
        ));
        out.push('\n');
        if !self.deterministic {
            out.push_str(&format!(
                "<!-- generated {} -->\n",
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            ));
        }
        out.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
        out.push('\n');
        // Axis frame.
        out.push_str(&format!(
            r##"<rect x="{m}" y="{m}" width="{w}" height="{h}" fill="none" stroke="#333" stroke-width="1"/>"##,
            m = self.margin,
            w = self.width - 2.0 * self.margin,
            h = self.height - 2.0 * self.margin
        ));
        out.push('\n');
        out.push_str(&format!(
            r#"<text x="{:.2}" y="20" font-size="13" font-family="sans-serif" text-anchor="middle">{}</text>"#,
            self.width / 2.0,
            escape(title)
        ));
        out.push('\n');
        for el in &self.body {
            out.push_str(el);
            out.push('\n');
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// CSV writer with stable formatting: header row, then `rows` with the
/// shortest round-trip float representation.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn fmt_f64(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}
