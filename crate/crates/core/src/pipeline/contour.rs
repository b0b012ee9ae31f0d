//! Outer-boundary tracing of binary masks.
//!
//! Components are 8-connected. Each is traced with Moore-neighbor tracing
//! starting from its first pixel in raster order. Tracing stops when the
//! start pixel is about to leave again by the same move it first left by
//! (Jacob's criterion).

use serde::{Deserialize, Serialize};

use crate::metrics::BinaryMask;

/// A closed boundary: consecutive points are 8-adjacent and the first point
/// is repeated at the end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<(usize, usize)>,
}

impl Contour {
    /// Distinct boundary pixels, in tracing order.
    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.points[..self.points.len() - 1]
    }
}

/// Clockwise on screen (y down), starting west.
const RING: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn ring_index(dx: isize, dy: isize) -> usize {
    RING.iter()
        .position(|&d| d == (dx, dy))
        .expect("backtrack pixel is a Moore neighbor")
}

/// One contour per 8-connected foreground component, ordered by each
/// component's first pixel in raster order.
pub fn extract_contours(mask: &BinaryMask) -> Vec<Contour> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut contours = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || seen[y * w + x] {
                continue;
            }
            seen[y * w + x] = true;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                for &(dx, dy) in &RING {
                    let (nx, ny) = (cx as isize + dx, cy as isize + dy);
                    if mask.get_signed(nx, ny) && !seen[ny as usize * w + nx as usize] {
                        seen[ny as usize * w + nx as usize] = true;
                        stack.push((nx as usize, ny as usize));
                    }
                }
            }
            contours.push(trace(mask, (x, y)));
        }
    }
    contours
}

fn trace(mask: &BinaryMask, start: (usize, usize)) -> Contour {
    let start = (start.0 as isize, start.1 as isize);
    // The raster-order first pixel always has a background west neighbor.
    let (mut p, mut b) = (start, (start.0 - 1, start.1));
    let mut points = vec![(start.0 as usize, start.1 as usize)];
    let mut first_move = None;
    let limit = 8 * mask.width() * mask.height() + 8;
    for _ in 0..limit {
        let from = ring_index(b.0 - p.0, b.1 - p.1);
        let next = (1..8).map(|step| (from + step) % 8).find_map(|k| {
            let c = (p.0 + RING[k].0, p.1 + RING[k].1);
            let prev = RING[(k + 7) % 8];
            mask.get_signed(c.0, c.1)
                .then_some((c, (p.0 + prev.0, p.1 + prev.1)))
        });
        let Some(step) = next else {
            // Isolated pixel.
            points.push(points[0]);
            break;
        };
        // Stop when the opening move from the start pixel is about to repeat.
        match first_move {
            None => first_move = Some(step),
            Some(m) if p == start && m == step => break,
            Some(_) => {}
        }
        (p, b) = step;
        points.push((p.0 as usize, p.1 as usize));
    }
    Contour { points }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adjacent(a: (usize, usize), b: (usize, usize)) -> bool {
        let dx = a.0.abs_diff(b.0);
        let dy = a.1.abs_diff(b.1);
        dx <= 1 && dy <= 1 && (dx, dy) != (0, 0)
    }

    #[test]
    fn empty_mask_has_no_contours() {
        assert!(extract_contours(&BinaryMask::empty(5, 5)).is_empty());
    }

    #[test]
    fn filled_square_traces_its_border() {
        let m = BinaryMask::from_fn(7, 7, |x, y| (2..5).contains(&x) && (1..4).contains(&y));
        let cs = extract_contours(&m);
        assert_eq!(cs.len(), 1);
        assert_eq!(
            cs[0].points,
            vec![
                (2, 1),
                (3, 1),
                (4, 1),
                (4, 2),
                (4, 3),
                (3, 3),
                (2, 3),
                (2, 2),
                (2, 1)
            ]
        );
    }

    #[test]
    fn single_pixel() {
        let m = BinaryMask::from_fn(3, 3, |x, y| x == 1 && y == 1);
        assert_eq!(extract_contours(&m)[0].points, vec![(1, 1), (1, 1)]);
    }

    #[test]
    fn two_components() {
        let m = BinaryMask::from_fn(10, 4, |x, y| y < 2 && !(2..=6).contains(&x));
        assert_eq!(extract_contours(&m).len(), 2);
    }

    #[test]
    fn start_pixel_revisited_from_other_sides() {
        let rows = [
            "#.##.##..#.#",
            "#####..###.#",
            "......##....",
            "###.#.......",
            ".#.####.....",
            "#.##.....#..",
            "##.#.#.#...#",
            "###..#.###..",
            "...###.#.###",
            "####..##.#.#",
            "..#.#..##..#",
            "##.....#.###",
        ];
        let m = BinaryMask::from_fn(12, 12, |x, y| rows[y].as_bytes()[x] == b'#');
        for c in extract_contours(&m) {
            assert!(
                c.points.len() < 200,
                "runaway trace of {} points",
                c.points.len()
            );
            assert_eq!(c.points.first(), c.points.last());
            assert!(c
                .points
                .windows(2)
                .all(|w| adjacent(w[0], w[1]) || c.points.len() == 2));
        }
    }

    #[test]
    fn diagonal_pixels_are_one_component() {
        let m = BinaryMask::from_fn(4, 4, |x, y| x == y);
        let cs = extract_contours(&m);
        assert_eq!(cs.len(), 1);
        let px: std::collections::BTreeSet<_> = cs[0].pixels().iter().copied().collect();
        assert_eq!(px.len(), 4);
    }

    #[test]
    fn contour_points_are_adjacent_and_on_boundary() {
        // Ring with a hole plus a thin spur.
        let m = BinaryMask::from_fn(12, 12, |x, y| {
            let r2 = (x as isize - 5).pow(2) + (y as isize - 5).pow(2);
            (9..=20).contains(&r2) || (y == 5 && x >= 9)
        });
        let cs = extract_contours(&m);
        assert_eq!(cs.len(), 1);
        let pts = &cs[0].points;
        assert_eq!(pts.first(), pts.last());
        for w in pts.windows(2) {
            assert!(adjacent(w[0], w[1]), "{:?} -> {:?}", w[0], w[1]);
        }
        for &(x, y) in pts {
            assert!(m.get(x, y));
            let on_edge = RING
                .iter()
                .any(|&(dx, dy)| !m.get_signed(x as isize + dx, y as isize + dy));
            assert!(on_edge);
        }
        // The spur tip is reached.
        assert!(pts.contains(&(11, 5)));
    }
}
