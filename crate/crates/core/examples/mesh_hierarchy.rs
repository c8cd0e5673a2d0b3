//! Red refinement of the unit square: metrics per level and the parent links
//! that make the velocity spaces nested.

use nlgalerkin::mesh::MeshHierarchy;

fn main() -> nlgalerkin::Result<()> {
    let h = MeshHierarchy::new(5);
    println!("level  h_max     vertices  triangles  min_angle");
    for k in 0..=h.max_level() {
        let m = h.level(k)?;
        m.validate()?;
        let s = m.stats();
        println!("{:>5}  {:.6}  {:>8}  {:>9}  {:.1}", s.level, s.h_max, s.n_vertices, s.n_triangles, s.min_angle);
    }

    let fine = h.level(3)?;
    let t = fine.n_triangles() - 1;
    let chain: Vec<usize> = (0..=3).rev().map(|l| fine.ancestor_triangle(t, l).unwrap()).collect();
    println!("\ntriangle {t} on level 3 descends from {chain:?} (levels 3..0)");
    Ok(())
}
