use bloch_fermi_web::{butterfly_points, contour_points, ids_points, spectrum_range};

#[test]
fn butterfly_triples() {
    let pts = butterfly_points(3, 8).unwrap();
    assert_eq!(pts.len() % 3, 0);
    // flux 0 is a single band [-4, 4]
    assert_eq!(pts[0], 0.0);
    assert!((pts[1] + 4.0).abs() < 1e-12 && (pts[2] - 4.0).abs() < 1e-12);
    assert!(butterfly_points(0, 8).is_err());
}

#[test]
fn contours_are_nan_separated_loops() {
    let pts = contour_points("square_laplacian", 0, 1, 1.0, 24).unwrap();
    assert!(pts.len() > 10);
    assert!(pts[pts.len() - 1].is_nan());
    let verts: Vec<[f64; 2]> = pts.chunks(2).map(|c| [c[0], c[1]]).collect();
    let end = verts.iter().position(|v| v[0].is_nan()).unwrap();
    assert_eq!(verts[0], verts[end - 1]);
    assert!(contour_points("square_laplacian", 0, 1, -5.0, 24).unwrap().is_empty());
    assert!(contour_points("nope", 0, 1, 1.0, 8).is_err());
}

#[test]
fn ids_curve_per_site() {
    let pts = ids_points("harper", 1, 3, 40, 12).unwrap();
    assert_eq!(pts.len(), 2 * 41);
    assert_eq!(pts[1], 0.0);
    assert_eq!(pts[pts.len() - 1], 1.0);
    let r = spectrum_range("lieb", 0, 1, 8).unwrap();
    assert!((r[0] + 2.0 * 2.0_f64.sqrt()).abs() < 1e-12);
}
