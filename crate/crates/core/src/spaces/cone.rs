use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rayon::prelude::*;

use super::collapse::CollapseMap;
use super::finite::{euclid, FiniteMms};
use super::model::PmmSpace;
use crate::{Error, Result};

/// Triangulated point cloud on the surface `{y² + z² = x/n, 0 ≤ x ≤ 1}` with
/// graph-geodesic distances and area-proportional atom masses summing to 1.
///
/// `resolution` rings (at `x = k/resolution`) of `resolution` angular samples
/// each, plus a single apex atom (index 0, the base point). Edge conductances
/// are the cotangent weights of the mesh (clipped at zero), which makes the
/// generator the lumped-mass surface Laplacian.
///
/// The returned collapse map sends an atom to its `x` coordinate in
/// `Interval(0, 1)`; its fibre bound is `π/√n`, half the widest circle.
pub fn mesh_cone(n: usize, resolution: usize) -> Result<(FiniteMms, CollapseMap)> {
    if resolution < 4 {
        return Err(Error::Disconnected(format!(
            "resolution {resolution} < 4 cannot triangulate the cone"
        )));
    }
    let n = n.max(1);
    let r = resolution;
    let count = 1 + r * r;
    let idx = |ring: usize, j: usize| 1 + (ring - 1) * r + (j % r);

    let mut pos = vec![[0.0f64; 3]; count];
    for ring in 1..=r {
        let x = ring as f64 / r as f64;
        let rad = (x / n as f64).sqrt();
        for j in 0..r {
            let phi = 2.0 * PI * j as f64 / r as f64;
            pos[idx(ring, j)] = [x, rad * phi.cos(), rad * phi.sin()];
        }
    }

    let mut triangles = Vec::with_capacity(2 * r * r);
    for j in 0..r {
        triangles.push([0, idx(1, j), idx(1, j + 1)]);
    }
    for ring in 1..r {
        for j in 0..r {
            let (a, b) = (idx(ring, j), idx(ring, j + 1));
            let (c, d) = (idx(ring + 1, j), idx(ring + 1, j + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }

    let mut area = vec![0.0; count];
    let mut total_area = 0.0;
    let mut cot = vec![Vec::<(usize, f64)>::new(); count];
    let mut adjacency = vec![Vec::<(usize, f64)>::new(); count];
    for t in &triangles {
        let [p, q, s] = t.map(|i| pos[i]);
        let a = 0.5 * norm(cross(sub(q, p), sub(s, p)));
        total_area += a;
        for k in 0..3 {
            let (i, j, opp) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            area[i] += a / 3.0;
            let u = sub(pos[i], pos[opp]);
            let v = sub(pos[j], pos[opp]);
            let c = dot(u, v) / norm(cross(u, v));
            cot[i].push((j, 0.5 * c));
            cot[j].push((i, 0.5 * c));
            let len = euclid(&pos[i], &pos[j]);
            adjacency[i].push((j, len));
            adjacency[j].push((i, len));
        }
    }

    let dist: Vec<f64> = (0..count)
        .into_par_iter()
        .flat_map_iter(|s| dijkstra(&adjacency, s))
        .collect();
    if dist.iter().any(|d| !d.is_finite()) {
        return Err(Error::Disconnected(
            "cone mesh graph is not connected".into(),
        ));
    }

    let mut conductance = vec![0.0; count * count];
    for i in 0..count {
        for &(j, c) in &cot[i] {
            conductance[i * count + j] += c / total_area;
        }
    }
    // symmetrize exactly, clip obtuse contributions
    for i in 0..count {
        for j in i + 1..count {
            let w = (0.5 * (conductance[i * count + j] + conductance[j * count + i])).max(0.0);
            conductance[i * count + j] = w;
            conductance[j * count + i] = w;
        }
    }

    let weights: Vec<f64> = area.iter().map(|a| a / total_area).collect();
    let coords: Vec<f64> = pos.iter().flatten().copied().collect();
    let mesh = FiniteMms::unchecked(dist, weights, 0)?
        .with_conductance(conductance)?
        .with_coords(3, coords)?
        .with_intrinsic_dim(2);

    let source = PmmSpace::finite(mesh.clone())?;
    let target = PmmSpace::interval(0.0, 1.0)?;
    let xs: Vec<f64> = pos.iter().map(|p| p[0]).collect();
    let offsets: Vec<f64> = pos
        .iter()
        .map(|p| {
            let rad = p[1].hypot(p[2]);
            rad * p[2].atan2(p[1]).abs()
        })
        .collect();
    let map = CollapseMap::new(
        source,
        target,
        PI / (n as f64).sqrt(),
        move |x| vec![xs[x[0] as usize]],
        move |x| offsets[x[0] as usize],
    );
    Ok((mesh, map))
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

pub(crate) fn dijkstra(adjacency: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adjacency.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adjacency[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    dist
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_resolution_is_rejected() {
        assert!(matches!(mesh_cone(4, 3), Err(Error::Disconnected(_))));
    }

    #[test]
    fn mesh_is_a_connected_probability_space() {
        let (mesh, map) = mesh_cone(4, 32).unwrap();
        assert_eq!(mesh.len(), 32 * 32 + 1);
        assert!((mesh.total_weight() - 1.0).abs() < 1e-12);
        assert!(mesh.is_connected());
        assert!((map.fiber_diameter_bound() - PI / 2.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(map.lipschitz_excess(200, &mut rng) <= 1e-9);
    }

    #[test]
    fn apex_to_rim_follows_the_meridian() {
        let n = 4.0;
        let (mesh, _) = mesh_cone(4, 64).unwrap();
        let rim = 1 + 63 * 64;
        let graph = mesh.dist(0, rim);
        // meridian of x = n r²: with x = s², the arc length is ∫₀¹ 2√(s² + 1/4n) ds
        let meridian =
            crate::numeric::integrate(|s| 2.0 * (s * s + 0.25 / n).sqrt(), 0.0, 1.0, 16, 8);
        assert!((meridian - 1.1617).abs() < 1e-4, "{meridian}");
        assert!(
            (graph - meridian).abs() < 0.02 * meridian,
            "{graph} vs {meridian}"
        );
        let slant = (1.0f64 + 1.0 / n).sqrt();
        assert!((graph - slant).abs() < 0.05 * slant, "{graph} vs {slant}");
    }

    #[test]
    fn mesh_metric_passes_full_validation() {
        let (mesh, _) = mesh_cone(2, 8).unwrap();
        mesh.validate().unwrap();
        assert!(mesh.triangle_violation() <= 1e-9);
    }
}
