use std::sync::Arc;

use super::function::FeFunction;
use super::space::{basis_values, FeSpace, Geometry};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Exact prolongation of a field on a coarse mesh to a nested fine space of
/// the same family: the result equals the coarse function pointwise.
pub fn prolongate(coarse: &FeFunction, fine_space: &Arc<FeSpace>) -> Result<FeFunction> {
    let coarse_space = coarse.space();
    if coarse_space.family() != fine_space.family() {
        return Err(Error::SpaceMismatch(format!(
            "cannot prolongate {:?} into {:?}",
            coarse_space.family(),
            fine_space.family()
        )));
    }
    let coarse_mesh = coarse_space.mesh();
    let fine_mesh = fine_space.mesh();
    if coarse_mesh.id() == fine_mesh.id() {
        return FeFunction::from_coeffs(fine_space, coarse.coeffs().to_vec());
    }
    if !fine_mesh.descends_from(coarse_mesh) {
        return Err(Error::NotNested(format!(
            "mesh at level {} does not refine the given level-{} mesh",
            fine_mesh.level(),
            coarse_mesh.level()
        )));
    }
    // meshes strictly between coarse and fine, coarse-most first
    let mut chain: Vec<Arc<Mesh>> = Vec::new();
    let mut cur = fine_mesh.parent().cloned();
    while let Some(m) = cur {
        if m.id() == coarse_mesh.id() {
            break;
        }
        cur = m.parent().cloned();
        chain.push(m);
    }
    chain.reverse();
    let mut field = coarse.clone();
    for m in chain {
        let space = FeSpace::new(&m, fine_space.family());
        field = prolongate_one(&field, &space)?;
    }
    prolongate_one(&field, fine_space)
}

fn prolongate_one(coarse: &FeFunction, fine_space: &Arc<FeSpace>) -> Result<FeFunction> {
    let fine_mesh = fine_space.mesh();
    let coarse_mesh = coarse.space().mesh();
    let parent_of = fine_mesh.parent_triangle();
    let fam = fine_space.family();
    let ns = fam.scalar().local_dofs();
    let comps = if fam.is_vector() { 2 } else { 1 };
    let mut out = vec![0.0; fine_space.dof_count()];
    let mut vals = [0.0; 6];
    // local nodes of a fine triangle in its own barycentric coordinates
    let nodes: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
    ];
    for t in 0..fine_mesh.num_triangles() {
        let parent = parent_of[t];
        let fine_geo = Geometry::of(fine_mesh, t);
        let parent_geo = Geometry::of(coarse_mesh, parent);
        let fine_dofs = fine_space.cell_dofs(t);
        let coarse_dofs = coarse.space().cell_dofs(parent);
        for (k, node) in nodes.iter().enumerate().take(ns) {
            let l = parent_geo.barycentric(fine_geo.point(node));
            basis_values(fam, &l, &mut vals);
            for c in 0..comps {
                let v: f64 = (0..ns).map(|j| vals[j] * coarse.coeffs()[coarse_dofs[c * ns + j]]).sum();
                out[fine_dofs[c * ns + k]] = v;
            }
        }
    }
    FeFunction::from_coeffs(fine_space, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{Family, NormKind};
    use crate::mesh::{build_crossed_mesh, uniform_refine, Rect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constants_survive() {
        let c = build_crossed_mesh(Rect::UNIT_SQUARE, 2).unwrap();
        let f = uniform_refine(&c).unwrap();
        let one = FeFunction::constant(&FeSpace::new(&c, Family::P1), 1.0);
        let p = prolongate(&one, &FeSpace::new(&f, Family::P1)).unwrap();
        assert!(p.coeffs().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn hat_function_midpoints() {
        let c = build_crossed_mesh(Rect::UNIT_SQUARE, 1).unwrap();
        let f = uniform_refine(&c).unwrap();
        let cs = FeSpace::new(&c, Family::P1);
        // hat at the centre vertex (index 2 in (y, x) order)
        let centre = c.vertices().iter().position(|p| *p == [0.5, 0.5]).unwrap();
        let mut hat = FeFunction::zeros(&cs);
        hat.coeffs_mut()[centre] = 1.0;
        let p = prolongate(&hat, &FeSpace::new(&f, Family::P1)).unwrap();
        for (v, x) in f.vertices().iter().enumerate() {
            let expected = if *x == [0.5, 0.5] {
                1.0
            } else if [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]].contains(x) {
                0.5
            } else {
                0.0
            };
            assert!((p.coeffs()[v] - expected).abs() < 1e-15, "{x:?}");
        }
    }

    #[test]
    fn random_p2_norms_preserved() {
        let c = build_crossed_mesh(Rect::UNIT_SQUARE, 2).unwrap();
        let f = uniform_refine(&uniform_refine(&c).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for fam in [Family::P2, Family::P2Vector, Family::P1] {
            let cs = FeSpace::new(&c, fam);
            let coeffs = (0..cs.dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = FeFunction::from_coeffs(&cs, coeffs).unwrap();
            let p = prolongate(&g, &FeSpace::new(&f, fam)).unwrap();
            for kind in [NormKind::L2, NormKind::H1] {
                assert!((g.norm(kind) - p.norm(kind)).abs() < 1e-12 * g.norm(kind));
            }
        }
    }

    #[test]
    fn rejects_unrelated_meshes() {
        let a = build_crossed_mesh(Rect::UNIT_SQUARE, 2).unwrap();
        let b = uniform_refine(&build_crossed_mesh(Rect::UNIT_SQUARE, 2).unwrap()).unwrap();
        let g = FeFunction::zeros(&FeSpace::new(&a, Family::P1));
        assert!(matches!(prolongate(&g, &FeSpace::new(&b, Family::P1)), Err(Error::NotNested(_))));
        let g2 = FeFunction::zeros(&FeSpace::new(&a, Family::P2));
        assert!(matches!(prolongate(&g2, &FeSpace::new(&b, Family::P1)), Err(Error::SpaceMismatch(_))));
    }
}
