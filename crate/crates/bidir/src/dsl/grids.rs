//! Grid-symmetry DSL: six operations. Rotations and flips are directly
//! invertible; the two stacking operations are conditionally invertible in
//! either argument.

use crate::ops::{CondInverse, FunctionDef, Registry};
use crate::values::{DomainError, Grid, Value, ValueKind, MAX_GRID_SIDE};

pub fn rotate_cw(g: &Grid) -> Grid {
    let (h, w) = (g.height(), g.width());
    Grid::build(w, h, |r, c| g.get(h - 1 - c, r)).expect("dims within bounds")
}

pub fn rotate_ccw(g: &Grid) -> Grid {
    let (h, w) = (g.height(), g.width());
    Grid::build(w, h, |r, c| g.get(c, w - 1 - r)).expect("dims within bounds")
}

pub fn flip_h(g: &Grid) -> Grid {
    let (h, w) = (g.height(), g.width());
    Grid::build(h, w, |r, c| g.get(r, w - 1 - c)).expect("dims unchanged")
}

pub fn flip_v(g: &Grid) -> Grid {
    let (h, w) = (g.height(), g.width());
    Grid::build(h, w, |r, c| g.get(h - 1 - r, c)).expect("dims unchanged")
}

pub fn hstack(left: &Grid, right: &Grid) -> Result<Grid, DomainError> {
    if left.height() != right.height() {
        return Err(DomainError::ShapeMismatch(format!(
            "hstack heights {} vs {}",
            left.height(),
            right.height()
        )));
    }
    let w = left.width() + right.width();
    if w > MAX_GRID_SIDE {
        return Err(DomainError::ShapeMismatch(format!("hstack width {w} exceeds max")));
    }
    Grid::build(left.height(), w, |r, c| {
        if c < left.width() {
            left.get(r, c)
        } else {
            right.get(r, c - left.width())
        }
    })
}

pub fn vstack(top: &Grid, bottom: &Grid) -> Result<Grid, DomainError> {
    if top.width() != bottom.width() {
        return Err(DomainError::ShapeMismatch(format!(
            "vstack widths {} vs {}",
            top.width(),
            bottom.width()
        )));
    }
    let h = top.height() + bottom.height();
    if h > MAX_GRID_SIDE {
        return Err(DomainError::ShapeMismatch(format!("vstack height {h} exceeds max")));
    }
    Grid::build(h, top.width(), |r, c| {
        if r < top.height() {
            top.get(r, c)
        } else {
            bottom.get(r - top.height(), c)
        }
    })
}

/// Deduce the complementary block of an hstack output. The known block must
/// match the corresponding columns of the output cell-for-cell.
pub fn hstack_cond_inverse(
    out: &Grid,
    known: &Grid,
    known_position: usize,
) -> Result<Grid, DomainError> {
    if known.height() != out.height() || known.width() >= out.width() {
        return Err(DomainError::ShapeMismatch(format!(
            "known block {}x{} does not fit output {}x{}",
            known.height(),
            known.width(),
            out.height(),
            out.width()
        )));
    }
    let kw = known.width();
    let rest = out.width() - kw;
    let (known_off, rest_off) = match known_position {
        0 => (0, kw),
        1 => (rest, 0),
        p => return Err(DomainError::OutOfDomain(format!("hstack position {p}"))),
    };
    for r in 0..out.height() {
        for c in 0..kw {
            if out.get(r, c + known_off) != known.get(r, c) {
                return Err(DomainError::NoPreimage(
                    "known grid is not a block of the output".into(),
                ));
            }
        }
    }
    Grid::build(out.height(), rest, |r, c| out.get(r, c + rest_off))
}

pub fn vstack_cond_inverse(
    out: &Grid,
    known: &Grid,
    known_position: usize,
) -> Result<Grid, DomainError> {
    if known.width() != out.width() || known.height() >= out.height() {
        return Err(DomainError::ShapeMismatch(format!(
            "known block {}x{} does not fit output {}x{}",
            known.height(),
            known.width(),
            out.height(),
            out.width()
        )));
    }
    let kh = known.height();
    let rest = out.height() - kh;
    let (known_off, rest_off) = match known_position {
        0 => (0, kh),
        1 => (rest, 0),
        p => return Err(DomainError::OutOfDomain(format!("vstack position {p}"))),
    };
    for r in 0..kh {
        for c in 0..out.width() {
            if out.get(r + known_off, c) != known.get(r, c) {
                return Err(DomainError::NoPreimage(
                    "known grid is not a block of the output".into(),
                ));
            }
        }
    }
    Grid::build(rest, out.width(), |r, c| out.get(r + rest_off, c))
}

fn unary(f: fn(&Grid) -> Grid) -> impl Fn(&[&Value]) -> Result<Value, DomainError> {
    move |args| Ok(Value::Grid(f(args[0].as_grid()?)))
}

macro_rules! unary_fwd {
    ($f:ident) => {
        |args: &[&Value]| unary($f)(args)
    };
}

macro_rules! unary_inv {
    ($f:ident) => {
        |out: &Value| Ok(vec![Value::Grid($f(out.as_grid()?))])
    };
}

pub fn registry() -> Registry {
    let g = ValueKind::Grid;
    Registry::new(vec![
        FunctionDef {
            name: "rotate_cw",
            arg_kinds: vec![g],
            out_kind: g,
            forward: unary_fwd!(rotate_cw),
            inverse: Some(unary_inv!(rotate_ccw)),
            cond_inverses: vec![],
        },
        FunctionDef {
            name: "rotate_ccw",
            arg_kinds: vec![g],
            out_kind: g,
            forward: unary_fwd!(rotate_ccw),
            inverse: Some(unary_inv!(rotate_cw)),
            cond_inverses: vec![],
        },
        FunctionDef {
            name: "flip_h",
            arg_kinds: vec![g],
            out_kind: g,
            forward: unary_fwd!(flip_h),
            inverse: Some(unary_inv!(flip_h)),
            cond_inverses: vec![],
        },
        FunctionDef {
            name: "flip_v",
            arg_kinds: vec![g],
            out_kind: g,
            forward: unary_fwd!(flip_v),
            inverse: Some(unary_inv!(flip_v)),
            cond_inverses: vec![],
        },
        FunctionDef {
            name: "hstack",
            arg_kinds: vec![g, g],
            out_kind: g,
            forward: |args| Ok(Value::Grid(hstack(args[0].as_grid()?, args[1].as_grid()?)?)),
            inverse: None,
            cond_inverses: vec![
                CondInverse {
                    known_positions: vec![0],
                    deduce: |out, known| {
                        let g = hstack_cond_inverse(out.as_grid()?, known[0].1.as_grid()?, 0)?;
                        Ok(vec![Value::Grid(g)])
                    },
                },
                CondInverse {
                    known_positions: vec![1],
                    deduce: |out, known| {
                        let g = hstack_cond_inverse(out.as_grid()?, known[0].1.as_grid()?, 1)?;
                        Ok(vec![Value::Grid(g)])
                    },
                },
            ],
        },
        FunctionDef {
            name: "vstack",
            arg_kinds: vec![g, g],
            out_kind: g,
            forward: |args| Ok(Value::Grid(vstack(args[0].as_grid()?, args[1].as_grid()?)?)),
            inverse: None,
            cond_inverses: vec![
                CondInverse {
                    known_positions: vec![0],
                    deduce: |out, known| {
                        let g = vstack_cond_inverse(out.as_grid()?, known[0].1.as_grid()?, 0)?;
                        Ok(vec![Value::Grid(g)])
                    },
                },
                CondInverse {
                    known_positions: vec![1],
                    deduce: |out, known| {
                        let g = vstack_cond_inverse(out.as_grid()?, known[0].1.as_grid()?, 1)?;
                        Ok(vec![Value::Grid(g)])
                    },
                },
            ],
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_grid(rng: &mut impl Rng, max_side: usize) -> Grid {
        let h = rng.random_range(1..=max_side);
        let w = rng.random_range(1..=max_side);
        Grid::build(h, w, |_, _| {
            crate::values::Color::new(rng.random_range(0..10)).unwrap()
        })
        .unwrap()
    }

    fn grid(rows: &[&[u8]]) -> Grid {
        Grid::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rotate_cw_definition() {
        assert_eq!(rotate_cw(&grid(&[&[1, 2], &[3, 4]])), grid(&[&[3, 1], &[4, 2]]));
    }

    #[test]
    fn flip_definitions() {
        assert_eq!(flip_v(&grid(&[&[1], &[2]])), grid(&[&[2], &[1]]));
        assert_eq!(flip_h(&grid(&[&[1, 2]])), grid(&[&[2, 1]]));
    }

    #[test]
    fn stack_definitions() {
        assert_eq!(
            hstack(&grid(&[&[1], &[2]]), &grid(&[&[3], &[4]])).unwrap(),
            grid(&[&[1, 3], &[2, 4]])
        );
        assert_eq!(vstack(&grid(&[&[1]]), &grid(&[&[2]])).unwrap(), grid(&[&[1], &[2]]));
        assert!(hstack(&grid(&[&[1], &[2]]), &grid(&[&[1], &[2], &[3]])).is_err());
        assert!(vstack(&grid(&[&[1]]), &grid(&[&[1, 2]])).is_err());
    }

    #[test]
    fn dihedral_group_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let g = random_grid(&mut rng, 6);
            assert_eq!(rotate_cw(&rotate_cw(&rotate_cw(&rotate_cw(&g)))), g);
            assert_eq!(flip_h(&flip_h(&g)), g);
            assert_eq!(flip_v(&flip_v(&g)), g);
            assert_eq!(rotate_cw(&rotate_ccw(&g)), g);
            assert_eq!(rotate_ccw(&rotate_cw(&g)), g);
            // flip horizontally == rotate twice then flip vertically
            assert_eq!(rotate_cw(&rotate_cw(&flip_v(&g))), flip_h(&g));
        }
    }

    #[test]
    fn hstack_via_rotated_vstack() {
        // hstack(a, b) built out of vstack and the diagonal mirror
        // rotate_cw . flip_v (i.e. transposition).
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mirror = |g: &Grid| rotate_cw(&flip_v(g));
        for _ in 0..500 {
            let h = rng.random_range(1..=5);
            let a = Grid::build(h, rng.random_range(1..=5), |_, _| {
                crate::values::Color::new(rng.random_range(0..10)).unwrap()
            })
            .unwrap();
            let b = Grid::build(h, rng.random_range(1..=5), |_, _| {
                crate::values::Color::new(rng.random_range(0..10)).unwrap()
            })
            .unwrap();
            let direct = hstack(&a, &b).unwrap();
            let composed = mirror(&vstack(&mirror(&a), &mirror(&b)).unwrap());
            assert_eq!(direct, composed);
        }
    }

    #[test]
    fn stack_cond_inverse_blocks() {
        let out = grid(&[&[1, 3], &[2, 4]]);
        assert_eq!(
            hstack_cond_inverse(&out, &grid(&[&[1], &[2]]), 0).unwrap(),
            grid(&[&[3], &[4]])
        );
        assert_eq!(
            hstack_cond_inverse(&out, &grid(&[&[3], &[4]]), 1).unwrap(),
            grid(&[&[1], &[2]])
        );
        assert!(hstack_cond_inverse(&out, &grid(&[&[9], &[9]]), 0).is_err());
    }

    #[test]
    fn cell_conservation_under_hstack() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let h = rng.random_range(1..=5);
            let mk = |rng: &mut ChaCha8Rng| {
                Grid::build(h, rng.random_range(1..=5), |_, _| {
                    crate::values::Color::new(rng.random_range(0..10)).unwrap()
                })
                .unwrap()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let out = hstack(&a, &b).unwrap();
            let count = |g: &Grid| {
                let mut c = [0usize; 10];
                for cell in g.cells() {
                    c[cell.code() as usize] += 1;
                }
                c
            };
            let mut sum = count(&a);
            for (s, n) in sum.iter_mut().zip(count(&b)) {
                *s += n;
            }
            assert_eq!(sum, count(&out));
        }
    }
}
