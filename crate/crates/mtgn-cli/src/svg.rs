//! Small hand-rolled SVG plots: scatter views of 2-D clouds, the training
//! history on a log scale, and the saddle spiral. No plotting dependency;
//! every byte written is deterministic for fixed inputs.

use mtgn::matrix::Matrix;
use mtgn::saddle::SaddleTrajectory;
use mtgn::trainer::TrainHistory;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Frame {
        let pad = |lo: f64, hi: f64| {
            if hi - lo > 1e-12 {
                (lo, hi)
            } else {
                (lo - 1.0, hi + 1.0)
            }
        };
        let (x_lo, x_hi) = pad(x_lo, x_hi);
        let (y_lo, y_hi) = pad(y_lo, y_hi);
        Frame { x_lo, x_hi, y_lo, y_hi }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - 2.0 * MARGIN)
    }

    /// SVG y grows downward; data y grows upward.
    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open_svg(out: &mut String, title: &str) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"#444\"/>\n\
         <text x=\"{m}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"15\">{title}</text>\n",
        m = MARGIN,
        w = WIDTH - 2.0 * MARGIN,
        h = HEIGHT - 2.0 * MARGIN,
        ty = MARGIN - 16.0,
    ));
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, width: f64, dash: Option<&str>) {
    if pts.len() < 2 {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = dash.map_or(String::new(), |d| format!(" stroke-dasharray=\"{d}\""));
    out.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash}/>\n",
        coords.join(" ")
    ));
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (i, (color, label)) in entries.iter().enumerate() {
        let y = MARGIN + 16.0 + 18.0 * i as f64;
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"{ry}\" width=\"11\" height=\"11\" fill=\"{color}\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"13\">{label}</text>\n",
            x = MARGIN + 8.0,
            ry = y - 10.0,
            tx = MARGIN + 24.0,
            ty = y,
        ));
    }
}

/// Scatter plot of labelled 2-D clouds; callers guarantee two columns.
pub fn scatter(clouds: &[(&Matrix<f64>, &str, &str)], title: &str) -> String {
    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for (cloud, _, _) in clouds {
        for i in 0..cloud.rows() {
            let r = cloud.row(i);
            x_lo = x_lo.min(r[0]);
            x_hi = x_hi.max(r[0]);
            y_lo = y_lo.min(r[1]);
            y_hi = y_hi.max(r[1]);
        }
    }
    let frame = Frame::new(x_lo, x_hi, y_lo, y_hi);
    let mut out = String::new();
    open_svg(&mut out, title);
    for (cloud, color, _) in clouds {
        for i in 0..cloud.rows() {
            let r = cloud.row(i);
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\" fill-opacity=\"0.55\"/>\n",
                frame.x(r[0]),
                frame.y(r[1]),
            ));
        }
    }
    let entries: Vec<(&str, &str)> = clouds.iter().map(|&(_, c, l)| (c, l)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// Training history: misfit, energy, and total on a log10 y axis, with
/// vertical marks at every bandwidth change.
pub fn history(history: &TrainHistory<f64>, title: &str) -> String {
    let records = &history.records;
    let mut out = String::new();
    if records.is_empty() {
        open_svg(&mut out, title);
        out.push_str(&format!(
            "<text x=\"{:.0}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"14\">no epochs recorded</text>\n</svg>\n",
            WIDTH / 2.0 - 60.0,
            HEIGHT / 2.0,
        ));
        return out;
    }
    let log = |v: f64| v.max(1e-300).log10();
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    let series: [(&str, &str, Box<dyn Fn(&mtgn::trainer::EpochRecord<f64>) -> f64>); 3] = [
        ("#4682b4", "misfit", Box::new(|r| r.misfit)),
        ("#2e8b57", "energy", Box::new(|r| r.energy)),
        ("#333333", "total", Box::new(|r| r.total)),
    ];
    for (_, _, get) in &series {
        for r in records {
            let v = get(r);
            if v > 0.0 {
                y_lo = y_lo.min(log(v));
                y_hi = y_hi.max(log(v));
            }
        }
    }
    if !y_lo.is_finite() || !y_hi.is_finite() {
        // everything is zero or negative: plot a flat floor line
        y_lo = -300.0;
        y_hi = 0.0;
    }
    let x_hi = (records.len() - 1).max(1) as f64;
    let frame = Frame::new(0.0, x_hi, y_lo, y_hi);
    open_svg(&mut out, title);
    // bandwidth changes
    for i in 1..records.len() {
        if records[i].sigma != records[i - 1].sigma {
            let x = frame.x(records[i].epoch as f64);
            out.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#bbbbbb\" stroke-dasharray=\"3,4\"/>\n",
                MARGIN,
                HEIGHT - MARGIN,
            ));
        }
    }
    for (color, _, get) in &series {
        let pts: Vec<(f64, f64)> = records
            .iter()
            .map(|r| (frame.x(r.epoch as f64), frame.y(log(get(r)))))
            .collect();
        polyline(&mut out, &pts, color, 1.3, None);
    }
    // y ticks at integer decades
    let lo_tick = y_lo.ceil() as i64;
    let hi_tick = y_hi.floor() as i64;
    if lo_tick <= hi_tick {
        let step = (((hi_tick - lo_tick) as usize / 8) + 1) as i64;
        let mut tick = lo_tick;
        while tick <= hi_tick {
            let y = frame.y(tick as f64);
            out.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#444\"/>\n\
                 <text x=\"4\" y=\"{ty:.2}\" font-family=\"sans-serif\" font-size=\"11\">1e{tick}</text>\n",
                MARGIN - 5.0,
                MARGIN,
                ty = y + 4.0,
            ));
            tick += step;
        }
    }
    // x ticks at the ends
    for epoch in [0.0, x_hi] {
        let x = frame.x(epoch);
        out.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#444\"/>\n\
             <text x=\"{tx:.2}\" y=\"{ty:.2}\" font-family=\"sans-serif\" font-size=\"11\">{epoch:.0}</text>\n",
            HEIGHT - MARGIN,
            HEIGHT - MARGIN + 5.0,
            tx = x - 8.0,
            ty = HEIGHT - MARGIN + 18.0,
        ));
    }
    legend(
        &mut out,
        &series
            .iter()
            .map(|&(c, l, _)| (c, l))
            .collect::<Vec<_>>(),
    );
    out.push_str("</svg>\n");
    out
}

/// The saddle spiral. The light staircase underneath shows the half-step
/// states (theta already updated, eta not yet), derived from consecutive
/// iterates of the alternating scheme.
pub fn saddle_path(traj: &SaddleTrajectory<f64>, title: &str) -> String {
    let pts = &traj.points;
    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for &(t, e) in pts {
        x_lo = x_lo.min(t);
        x_hi = x_hi.max(t);
        y_lo = y_lo.min(e);
        y_hi = y_hi.max(e);
    }
    let frame = Frame::new(x_lo, x_hi, y_lo, y_hi);
    let mut out = String::new();
    open_svg(&mut out, title);
    // axes through the origin
    let ox = frame.x(0.0);
    let oy = frame.y(0.0);
    out.push_str(&format!(
        "<line x1=\"{ox:.2}\" y1=\"{:.2}\" x2=\"{ox:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n\
         <line x1=\"{:.2}\" y1=\"{oy:.2}\" x2=\"{:.2}\" y2=\"{oy:.2}\" stroke=\"#dddddd\"/>\n",
        MARGIN,
        HEIGHT - MARGIN,
        MARGIN,
        WIDTH - MARGIN,
    ));
    let staircase: Vec<(f64, f64)> = pts
        .windows(2)
        .flat_map(|w| {
            let (t0, e0) = w[0];
            let (t1, e1) = w[1];
            [
                (frame.x(t0), frame.y(e0)),
                (frame.x(t1), frame.y(e0)),
                (frame.x(t1), frame.y(e1)),
            ]
        })
        .collect();
    polyline(&mut out, &staircase, "#f0ad4e", 0.5, None);
    let path: Vec<(f64, f64)> = pts.iter().map(|&(t, e)| (frame.x(t), frame.y(e))).collect();
    polyline(&mut out, &path, "#4682b4", 1.0, None);
    if let Some(&(t, e)) = pts.first() {
        out.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#2e8b57\"/>\n",
            frame.x(t),
            frame.y(e),
        ));
    }
    if let Some(&(t, e)) = pts.last() {
        out.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#d9534f\"/>\n",
            frame.x(t),
            frame.y(e),
        ));
    }
    legend(
        &mut out,
        &[
            ("#4682b4", "iterates"),
            ("#f0ad4e", "half steps"),
            ("#2e8b57", "start"),
            ("#d9534f", "end"),
        ],
    );
    out.push_str("</svg>\n");
    out
}
