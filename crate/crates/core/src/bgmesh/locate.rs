use nalgebra::Point2;

use super::TriangleMesh;

/// Uniform-grid bucketing of triangles for point location.
#[derive(Debug, Clone)]
pub struct TriangleLocator<'a> {
    mesh: &'a TriangleMesh,
    origin: Point2<f64>,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> TriangleLocator<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        let bb = mesh.bounding_box();
        let n = mesh.n_triangles().max(1) as f64;
        let cell = (bb.width() * bb.height() / n).sqrt().max(f64::MIN_POSITIVE) * 1.5;
        let nx = ((bb.width() / cell).ceil() as usize).max(1);
        let ny = ((bb.height() / cell).ceil() as usize).max(1);
        let origin = Point2::new(bb.min[0], bb.min[1]);
        let mut buckets = vec![Vec::new(); nx * ny];
        for t in 0..mesh.n_triangles() {
            let p = mesh.triangle_points(t);
            let (mut lo, mut hi) = (p[0], p[0]);
            for q in &p[1..] {
                lo = lo.inf(q);
                hi = hi.sup(q);
            }
            let (i0, j0) = cell_of(origin, cell, nx, ny, &lo);
            let (i1, j1) = cell_of(origin, cell, nx, ny, &hi);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Self {
            mesh,
            origin,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// A triangle containing `p` (edges inflated by `tol`), if any.
    pub fn locate(&self, p: &Point2<f64>, tol: f64) -> Option<usize> {
        let bb_lo = self.origin;
        if p.x < bb_lo.x - tol || p.y < bb_lo.y - tol {
            return None;
        }
        let (i, j) = cell_of(self.origin, self.cell, self.nx, self.ny, p);
        self.buckets[j * self.nx + i]
            .iter()
            .copied()
            .find(|&t| contains(&self.mesh.triangle_points(t), p, tol))
    }
}

fn cell_of(origin: Point2<f64>, cell: f64, nx: usize, ny: usize, p: &Point2<f64>) -> (usize, usize) {
    let i = ((p.x - origin.x) / cell).floor().clamp(0.0, (nx - 1) as f64) as usize;
    let j = ((p.y - origin.y) / cell).floor().clamp(0.0, (ny - 1) as f64) as usize;
    (i, j)
}

fn contains(t: &[Point2<f64>; 3], p: &Point2<f64>, tol: f64) -> bool {
    (0..3).all(|k| {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        let e = b - a;
        e.perp(&(p - a)) >= -tol * e.norm()
    })
}
