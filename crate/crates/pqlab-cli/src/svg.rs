//! Deterministic filled-band rendering of a nodal field: each grid cell
//! whose corners all carry values becomes a rectangle colored by one of 16
//! fixed levels between the field minimum and maximum.

use pqlab::ScalarField;

const PALETTE: [&str; 16] = [
    "#0d0887", "#2d0594", "#44039e", "#5901a5", "#6e00a8", "#8305a7", "#9511a1", "#a72197",
    "#b6308b", "#c5407e", "#d14e72", "#dd5e66", "#e76e5b", "#f07f4f", "#f79044", "#fca338",
];

const VIEW: f64 = 640.0;

pub fn render_field(u: &ScalarField, config_hash: &str) -> String {
    let d = u.domain();
    let vals = u.values();
    let carrier = |k: usize| d.interior[k] || d.boundary[k];

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..vals.len() {
        if carrier(k) {
            lo = lo.min(vals[k]);
            hi = hi.max(vals[k]);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 0.0;
    }
    let span = (hi - lo).max(f64::MIN_POSITIVE);

    let w = (d.nx - 1) as f64;
    let h = (d.ny - 1) as f64;
    let scale = VIEW / w.max(h);
    let width = w * scale;
    let height = h * scale;

    let mut out = String::with_capacity(1 << 16);
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" \
         viewBox=\"0 0 {width:.1} {height:.1}\">\n"
    ));
    out.push_str(&format!(
        "<desc>artifact_version={} config_hash={}</desc>\n",
        pqlab::ARTIFACT_VERSION,
        config_hash
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");

    for iy in 0..d.ny - 1 {
        for ix in 0..d.nx - 1 {
            let sw = iy * d.nx + ix;
            let se = sw + 1;
            let nw = sw + d.nx;
            let ne = nw + 1;
            if !(carrier(sw) && carrier(se) && carrier(nw) && carrier(ne)) {
                continue;
            }
            let v = 0.25 * (vals[sw] + vals[se] + vals[nw] + vals[ne]);
            let level = (((v - lo) / span) * 16.0).floor().clamp(0.0, 15.0) as usize;
            // SVG y grows downward; flip so the grid's north is up.
            let x = ix as f64 * scale;
            let y = (d.ny - 2 - iy) as f64 * scale;
            out.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n",
                scale + 0.05,
                scale + 0.05,
                PALETTE[level]
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}
