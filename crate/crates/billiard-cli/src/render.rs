//! Deterministic SVG rendering of 2D scenes and orbits: obstacle outlines,
//! closed orbit polylines, and normals at reflection points.

use billiard::geometry::Scene;
use billiard::orbits::PeriodicOrbit;
use billiard::{Error, Result};

const NORMAL_LENGTH: f64 = 0.5;

/// Renders a 2D scene with orbit polylines into an SVG string. Output is
/// byte-deterministic for fixed input (fixed-precision number formatting,
/// no timestamps).
pub fn render_svg(scene: &Scene, orbits: &[PeriodicOrbit], header_comment: &str) -> Result<String> {
    if scene.dimension() != 2 {
        return Err(Error::Domain(format!(
            "SVG rendering supports dimension 2, scene has {}",
            scene.dimension()
        )));
    }
    // Bounds over obstacles and orbit points, with a unit margin.
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for ob in scene.obstacles() {
        let r = ob.diameter() / 2.0;
        min_x = min_x.min(ob.center()[0] - r);
        max_x = max_x.max(ob.center()[0] + r);
        min_y = min_y.min(ob.center()[1] - r);
        max_y = max_y.max(ob.center()[1] + r);
    }
    for orbit in orbits {
        for p in &orbit.points {
            min_x = min_x.min(p[0]);
            max_x = max_x.max(p[0]);
            min_y = min_y.min(p[1]);
            max_y = max_y.max(p[1]);
        }
    }
    let margin = 1.0;
    let width = max_x - min_x + 2.0 * margin;
    let height = max_y - min_y + 2.0 * margin;
    // SVG y grows downward; reflect about the vertical center of the view box.
    let fy = |y: f64| -> f64 { min_y + max_y - y };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        fmt(min_x - margin),
        fmt(min_y - margin),
        fmt(width),
        fmt(height)
    ));
    svg.push_str(&format!("<!-- {header_comment} -->\n"));

    for ob in scene.obstacles() {
        let c = ob.center();
        if let Some(r) = ob.sphere_radius() {
            svg.push_str(&format!(
                "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#d0d7de\" stroke=\"#1f2328\" stroke-width=\"0.05\"/>\n",
                fmt(c[0]),
                fmt(fy(c[1])),
                fmt(r)
            ));
        } else {
            // General 2D quadric: semi-axes and tilt from the shape matrix.
            let eig = ob.shape().clone().symmetric_eigen();
            let rx = 1.0 / eig.eigenvalues[0].sqrt();
            let ry = 1.0 / eig.eigenvalues[1].sqrt();
            let angle = eig.eigenvectors[(1, 0)].atan2(eig.eigenvectors[(0, 0)]);
            svg.push_str(&format!(
                "  <ellipse cx=\"{}\" cy=\"{}\" rx=\"{}\" ry=\"{}\" transform=\"rotate({} {} {})\" fill=\"#d0d7de\" stroke=\"#1f2328\" stroke-width=\"0.05\"/>\n",
                fmt(c[0]),
                fmt(fy(c[1])),
                fmt(rx),
                fmt(ry),
                fmt(-angle.to_degrees()),
                fmt(c[0]),
                fmt(fy(c[1]))
            ));
        }
    }

    let palette = ["#0969da", "#bc4c00", "#8250df", "#1a7f37", "#cf222e"];
    for (k, orbit) in orbits.iter().enumerate() {
        let color = palette[k % palette.len()];
        let points: Vec<String> = orbit
            .points
            .iter()
            .map(|p| format!("{},{}", fmt(p[0]), fmt(fy(p[1]))))
            .collect();
        svg.push_str(&format!(
            "  <polygon points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"0.06\"/>\n",
            points.join(" ")
        ));
        for (j, p) in orbit.points.iter().enumerate() {
            let nu = scene.obstacle(orbit.word.symbols()[j]).normal(p);
            let tip_x = p[0] + NORMAL_LENGTH * nu[0];
            let tip_y = p[1] + NORMAL_LENGTH * nu[1];
            svg.push_str(&format!(
                "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"0.03\"/>\n",
                fmt(p[0]),
                fmt(fy(p[1])),
                fmt(tip_x),
                fmt(fy(tip_y))
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}
