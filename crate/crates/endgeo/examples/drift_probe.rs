use endgeo::fixtures;
use endgeo::holonomy::{vertex_block_form, word_ball, BlockKind};
use endgeo::sphere::ProjPoint;
use endgeo::Tol;

fn main() {
    let tol = Tol::default();
    let gens = fixtures::so21_schottky_sl4(&tol).unwrap();
    let sample = word_ball(&gens, 7, &tol).unwrap();
    let v = ProjPoint::basis(4, 3);
    let mut worst = 0.0f64;
    let mut count = 0;
    for el in &sample.ball {
        let bf = match vertex_block_form(&el.map, &v, BlockKind::Radial, &tol) {
            Ok(b) => b,
            Err(e) => {
                println!("block form failed at {:?}: {e}", el.word);
                continue;
            }
        };
        let eigs = bf.linear_part.clone().complex_eigenvalues();
        let drift: f64 = eigs.iter().map(|z| z.norm().ln()).sum();
        if drift.abs() > worst.abs() {
            worst = drift;
        }
        if drift.abs() > 5e-2 {
            count += 1;
            if count <= 3 {
                println!(
                    "block drift {drift:.4e} at {:?}; det {:.6e}; eig moduli {:?}",
                    el.word,
                    bf.linear_part.determinant(),
                    eigs.iter().map(|z| z.norm()).collect::<Vec<_>>()
                );
            }
        }
        if let Err(e) = bf.full_top_norm(&tol) {
            count += 1;
            if count <= 6 {
                println!("full_top_norm failed at {:?}: {e}", el.word);
            }
        }
    }
    println!("worst block drift {worst:.4e}, failures {count}");
}
