//! Quick-look SVG rendering of trajectory polylines. The CSV/JSON files are
//! the authoritative outputs; this is a convenience view only.

use num_complex::Complex64;

pub struct SvgCanvas {
    width: f64,
    height: f64,
    re_min: f64,
    re_max: f64,
    im_min: f64,
    im_max: f64,
    body: String,
}

impl SvgCanvas {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        SvgCanvas {
            width: 800.0,
            height: 600.0,
            re_min,
            re_max,
            im_min,
            im_max,
            body: String::new(),
        }
    }

    fn map(&self, z: Complex64) -> (f64, f64) {
        let x = (z.re - self.re_min) / (self.re_max - self.re_min) * self.width;
        // SVG y grows downward.
        let y = (self.im_max - z.im) / (self.im_max - self.im_min) * self.height;
        (x, y)
    }

    pub fn polyline(&mut self, points: &[Complex64], color: &str, stroke_width: f64) {
        if points.len() < 2 {
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&z| {
                let (x, y) = self.map(z);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        self.body.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{stroke_width}\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
    }

    pub fn dot(&mut self, z: Complex64, color: &str, radius: f64) {
        let (x, y) = self.map(z);
        self.body.push_str(&format!(
            "  <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{radius}\" fill=\"{color}\"/>\n"
        ));
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n  <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            body = self.body
        )
    }
}
