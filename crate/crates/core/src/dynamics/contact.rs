//! Narrow phase: cube against ground half-space and cube against cube.
//!
//! The cube-cube test runs the 15-axis separating axis test, then either
//! clips the incident face against the reference face's side planes or, for
//! edge-edge contact, emits the midpoint of the closest points between the
//! two edges.

use nalgebra::Vector3;

use super::RigidBody;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub point: Vector3<f64>,
    /// Unit normal pointing from the second collider toward the first.
    pub normal: Vector3<f64>,
    pub penetration: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum Collider<'a> {
    Body(&'a RigidBody),
    /// The half-space z <= 0.
    Ground,
}

/// Contact points between `a` and `b`; empty when separated.
pub fn contact_manifold(a: &RigidBody, b: Collider<'_>) -> Vec<Contact> {
    let mut out = Vec::with_capacity(8);
    contact_manifold_into(a, b, &mut out);
    out
}

/// Appends the contacts between `a` and `b` to `out`.
pub fn contact_manifold_into(a: &RigidBody, b: Collider<'_>, out: &mut Vec<Contact>) {
    match b {
        Collider::Ground => box_ground(a, out),
        Collider::Body(b) => {
            let reach = a.bounding_radius() + b.bounding_radius();
            if (a.position - b.position).norm_squared() <= reach * reach {
                box_box(a, b, out);
            }
        }
    }
}

fn box_ground(a: &RigidBody, out: &mut Vec<Contact>) {
    for c in a.corners() {
        if c.z <= 0.0 {
            out.push(Contact { point: c, normal: Vector3::z(), penetration: -c.z });
        }
    }
}

#[derive(Clone, Copy)]
enum Feature {
    FaceA(usize),
    FaceB(usize),
    Edge(usize, usize),
}

// Face axes win unless another axis is clearly less penetrating.
const REL_TOL: f64 = 0.95;
const ABS_TOL: f64 = 0.01;

fn box_box(a: &RigidBody, b: &RigidBody, out: &mut Vec<Contact>) {
    let ra = a.rotation();
    let rb = b.rotation();
    let axes_a = [ra.column(0).into_owned(), ra.column(1).into_owned(), ra.column(2).into_owned()];
    let axes_b = [rb.column(0).into_owned(), rb.column(1).into_owned(), rb.column(2).into_owned()];
    let (ha, hb) = (a.half_side, b.half_side);
    let d = b.position - a.position;

    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = axes_a[i].dot(&axes_b[j]).abs();
        }
    }

    let mut best_a = (f64::NEG_INFINITY, 0);
    for i in 0..3 {
        let sep = d.dot(&axes_a[i]).abs() - ha - hb * (c[i][0] + c[i][1] + c[i][2]);
        if sep > 0.0 {
            return;
        }
        if sep > best_a.0 {
            best_a = (sep, i);
        }
    }
    let mut best_b = (f64::NEG_INFINITY, 0);
    for j in 0..3 {
        let sep = d.dot(&axes_b[j]).abs() - hb - ha * (c[0][j] + c[1][j] + c[2][j]);
        if sep > 0.0 {
            return;
        }
        if sep > best_b.0 {
            best_b = (sep, j);
        }
    }
    let mut best_edge: Option<(f64, usize, usize, Vector3<f64>)> = None;
    for i in 0..3 {
        for j in 0..3 {
            let axis = axes_a[i].cross(&axes_b[j]);
            let len = axis.norm();
            if len < 1e-6 {
                continue;
            }
            let axis = axis / len;
            let proj_a = ha * axes_a.iter().map(|u| u.dot(&axis).abs()).sum::<f64>();
            let proj_b = hb * axes_b.iter().map(|u| u.dot(&axis).abs()).sum::<f64>();
            let sep = d.dot(&axis).abs() - proj_a - proj_b;
            if sep > 0.0 {
                return;
            }
            if best_edge.map_or(true, |e| sep > e.0) {
                best_edge = Some((sep, i, j, axis));
            }
        }
    }

    let (mut feature, mut sep) = (Feature::FaceA(best_a.1), best_a.0);
    if best_b.0 > REL_TOL * sep + ABS_TOL * hb {
        feature = Feature::FaceB(best_b.1);
        sep = best_b.0;
    }
    if let Some((esep, i, j, _)) = best_edge {
        if esep > REL_TOL * sep + ABS_TOL * ha.max(hb) {
            feature = Feature::Edge(i, j);
        }
    }

    match feature {
        Feature::FaceA(i) => {
            // reference face on A, facing B
            let nr = if axes_a[i].dot(&d) >= 0.0 { axes_a[i] } else { -axes_a[i] };
            face_contact(a, &axes_a, i, nr, b, &axes_b, -nr, out);
        }
        Feature::FaceB(j) => {
            let nr = if axes_b[j].dot(&d) <= 0.0 { axes_b[j] } else { -axes_b[j] };
            face_contact(b, &axes_b, j, nr, a, &axes_a, nr, out);
        }
        Feature::Edge(i, j) => {
            let (esep, _, _, axis) = best_edge.expect("edge selected");
            // normal from b to a
            let n = if axis.dot(&d) <= 0.0 { axis } else { -axis };
            edge_contact(a, &axes_a, i, b, &axes_b, j, n, -esep, out);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn face_contact(
    reference: &RigidBody,
    ref_axes: &[Vector3<f64>; 3],
    ref_axis: usize,
    nr: Vector3<f64>,
    incident: &RigidBody,
    inc_axes: &[Vector3<f64>; 3],
    normal: Vector3<f64>,
    out: &mut Vec<Contact>,
) {
    // incident face: the one most anti-parallel to the reference normal
    let mut k = 0;
    let mut best = -1.0;
    for (idx, ax) in inc_axes.iter().enumerate() {
        let v = nr.dot(ax).abs();
        if v > best {
            best = v;
            k = idx;
        }
    }
    let inc_normal = if nr.dot(&inc_axes[k]) > 0.0 { -inc_axes[k] } else { inc_axes[k] };
    let hi = incident.half_side;
    let center = incident.position + inc_normal * hi;
    let (u, v) = (inc_axes[(k + 1) % 3] * hi, inc_axes[(k + 2) % 3] * hi);
    let mut poly: Vec<Vector3<f64>> = vec![center + u + v, center - u + v, center - u - v, center + u - v];

    let hr = reference.half_side;
    let side_axes = [ref_axes[(ref_axis + 1) % 3], ref_axes[(ref_axis + 2) % 3]];
    let mut scratch = Vec::with_capacity(8);
    for axis in side_axes {
        for sign in [1.0, -1.0] {
            let dir = axis * sign;
            clip(&poly, &mut scratch, |p| (p - reference.position).dot(&dir) - hr);
            std::mem::swap(&mut poly, &mut scratch);
            if poly.is_empty() {
                return;
            }
        }
    }
    drop_collinear(&mut poly, COLLINEAR_DISTANCE * hr);
    let start = out.len();
    for p in poly {
        let s = (p - reference.position).dot(&nr) - hr;
        if s <= 0.0 {
            out.push(Contact { point: p - nr * (0.5 * s), normal, penetration: -s });
        }
    }
    merge_close(out, start, MERGE_DISTANCE * hr);
}

/// Fraction of the reference half-side under which a polygon vertex counts
/// as lying on the segment joining its neighbours.
const COLLINEAR_DISTANCE: f64 = 1e-3;

/// Removes, in one simultaneous pass, every vertex of the closed polygon that
/// lies within `eps` of the line through its two neighbours.
fn drop_collinear(poly: &mut Vec<Vector3<f64>>, eps: f64) {
    let n = poly.len();
    if n <= 3 {
        return;
    }
    let keep: Vec<bool> = (0..n)
        .map(|i| {
            let (prev, p, next) = (poly[(i + n - 1) % n], poly[i], poly[(i + 1) % n]);
            let d = next - prev;
            let len = d.norm();
            len < eps || d.cross(&(p - prev)).norm() / len >= eps
        })
        .collect();
    if keep.iter().filter(|&&k| k).count() >= 3 {
        let mut idx = 0;
        poly.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
    }
}

/// Fraction of the reference half-side within which clipped points are merged.
const MERGE_DISTANCE: f64 = 0.04;

/// Replaces each cluster of contacts in `out[start..]` linked by gaps under
/// `eps` with one contact at the cluster centroid carrying its deepest
/// penetration. Slightly yawed faces otherwise yield close point pairs that
/// appear and vanish between steps. The result does not depend on the input order.
fn merge_close(out: &mut Vec<Contact>, start: usize, eps: f64) {
    let pts = out.split_off(start);
    let n = pts.len();
    let mut label: Vec<usize> = (0..n).collect();
    // tiny n: relabel until the single-linkage components settle
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            for j in 0..n {
                if label[j] < label[i] && (pts[i].point - pts[j].point).norm() < eps {
                    label[i] = label[j];
                    changed = true;
                }
            }
        }
    }
    for root in 0..n {
        let members: Vec<&Contact> = (0..n).filter(|&i| label[i] == root).map(|i| &pts[i]).collect();
        if members.is_empty() {
            continue;
        }
        let point = members.iter().map(|c| c.point).sum::<Vector3<f64>>() / members.len() as f64;
        let penetration = members.iter().map(|c| c.penetration).fold(0.0, f64::max);
        out.push(Contact { point, normal: members[0].normal, penetration });
    }
}

/// Sutherland-Hodgman against the half-space `dist(p) <= 0`.
fn clip(input: &[Vector3<f64>], out: &mut Vec<Vector3<f64>>, dist: impl Fn(&Vector3<f64>) -> f64) {
    out.clear();
    let n = input.len();
    for idx in 0..n {
        let p = input[idx];
        let q = input[(idx + 1) % n];
        let (dp, dq) = (dist(&p), dist(&q));
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            out.push(p + (q - p) * t);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn edge_contact(
    a: &RigidBody,
    axes_a: &[Vector3<f64>; 3],
    i: usize,
    b: &RigidBody,
    axes_b: &[Vector3<f64>; 3],
    j: usize,
    n: Vector3<f64>,
    penetration: f64,
    out: &mut Vec<Contact>,
) {
    let sgn = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
    // the edge of a deepest toward b, and of b deepest toward a
    let mut pa = a.position;
    for (k, ax) in axes_a.iter().enumerate() {
        if k != i {
            pa += ax * (a.half_side * sgn(-ax.dot(&n)));
        }
    }
    let mut pb = b.position;
    for (k, ax) in axes_b.iter().enumerate() {
        if k != j {
            pb += ax * (b.half_side * sgn(ax.dot(&n)));
        }
    }
    let (da, db) = (axes_a[i], axes_b[j]);
    let r = pa - pb;
    let bb = da.dot(&db);
    let denom = 1.0 - bb * bb;
    let (c, f) = (da.dot(&r), db.dot(&r));
    let s = if denom > 1e-12 { (bb * f - c) / denom } else { 0.0 };
    let s = s.clamp(-a.half_side, a.half_side);
    let t = (f + bb * s).clamp(-b.half_side, b.half_side);
    let point = 0.5 * ((pa + da * s) + (pb + db * t));
    out.push(Contact { point, normal: n, penetration: penetration.max(0.0) });
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn cube_at(x: f64, y: f64, z: f64) -> RigidBody {
        RigidBody::cube(Vector3::new(x, y, z), 1.0, 500.0)
    }

    #[test]
    fn resting_on_ground() {
        let c = contact_manifold(&cube_at(0.0, 0.0, 0.5), Collider::Ground);
        assert_eq!(c.len(), 4);
        for k in &c {
            assert_eq!(k.normal, Vector3::z());
            assert_eq!(k.penetration, 0.0);
            assert_eq!(k.point.z, 0.0);
        }
    }

    #[test]
    fn above_ground_is_empty() {
        assert!(contact_manifold(&cube_at(0.0, 0.0, 0.6), Collider::Ground).is_empty());
    }

    #[test]
    fn slightly_yawed_stack_keeps_four_points() {
        for yaw in [1e-5, 1e-4, -3e-4] {
            let a = {
                let mut r = cube_at(0.0, 0.0, 1.5 - 1e-4);
                r.orientation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
                r
            };
            let b = cube_at(0.0, 0.0, 0.5);
            assert_eq!(contact_manifold(&a, Collider::Body(&b)).len(), 4, "yaw {yaw}");
        }
    }

    #[test]
    fn separated_cubes() {
        let a = cube_at(0.0, 0.0, 0.5);
        let b = cube_at(2.0, 0.0, 0.5);
        assert!(contact_manifold(&a, Collider::Body(&b)).is_empty());
        // gap along a diagonal that only an edge axis separates
        let mut r = cube_at(1.05, 1.05, 0.5);
        r.orientation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_4);
        assert!(contact_manifold(&a, Collider::Body(&r)).is_empty());
    }

    #[test]
    fn offset_stack_spans_overlap_rectangle() {
        let bottom = cube_at(0.0, 0.0, 0.5);
        let top = cube_at(0.3, 0.0, 1.5);
        let c = contact_manifold(&top, Collider::Body(&bottom));
        assert_eq!(c.len(), 4);
        // overlap of [-0.5, 0.5] and [-0.2, 0.8] in x, full width in y
        let mut xs: Vec<f64> = c.iter().map(|k| k.point.x).collect();
        let mut ys: Vec<f64> = c.iter().map(|k| k.point.y).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        for (got, want) in xs.iter().zip([-0.2, -0.2, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-12, "{xs:?}");
        }
        for (got, want) in ys.iter().zip([-0.5, -0.5, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-12, "{ys:?}");
        }
        for k in &c {
            assert!((k.normal - Vector3::z()).norm() < 1e-12);
            assert!(k.penetration.abs() < 1e-12);
            assert!((k.point.z - 1.0).abs() < 1e-12);
        }
        // reversed roles flip the normal
        let c = contact_manifold(&bottom, Collider::Body(&top));
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|k| (k.normal + Vector3::z()).norm() < 1e-12));
    }

    #[test]
    fn penetrating_side_by_side() {
        let a = cube_at(0.0, 0.0, 0.5);
        let b = cube_at(0.9, 0.2, 0.5);
        let c = contact_manifold(&a, Collider::Body(&b));
        assert!(!c.is_empty() && c.len() <= 8);
        for k in &c {
            assert!((k.normal - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
            assert!((k.penetration - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn crossed_edges_give_single_point() {
        // a cube rolled 45 degrees about x resting its edge across another
        // cube's edge rolled 45 degrees about y
        let mut a = cube_at(0.0, 0.0, 0.0);
        a.orientation = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_4);
        let mut b = cube_at(0.0, 0.0, 2f64.sqrt() - 0.05);
        b.orientation = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::FRAC_PI_4);
        let c = contact_manifold(&b, Collider::Body(&a));
        assert_eq!(c.len(), 1);
        assert!((c[0].normal - Vector3::z()).norm() < 1e-9, "{:?}", c[0].normal);
        assert!((c[0].penetration - 0.05).abs() < 1e-9);
        assert!((c[0].point - Vector3::new(0.0, 0.0, 0.5 * 2f64.sqrt() - 0.025)).norm() < 1e-9);
    }

    #[test]
    fn normals_unit_and_penetrations_nonnegative() {
        let a = cube_at(0.0, 0.0, 0.5);
        for k in 0..200 {
            let t = k as f64 * 0.1;
            let mut b = cube_at(0.7 * t.cos(), 0.7 * t.sin(), 1.3 + 0.1 * (3.0 * t).sin());
            b.orientation = UnitQuaternion::from_euler_angles(0.3 * t.sin(), 0.2 * t.cos(), t);
            let c = contact_manifold(&b, Collider::Body(&a));
            assert!(c.len() <= 8);
            for k in c {
                assert!((k.normal.norm() - 1.0).abs() < 1e-9);
                assert!(k.penetration >= 0.0);
            }
        }
    }
}
