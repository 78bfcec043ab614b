use super::frame::{BinaryMask, MIN_HEIGHT, MIN_WIDTH};
use crate::error::{Error, Result};

pub const GRID_ROWS: usize = 3;
pub const GRID_COLS: usize = 6;

/// Cells r1..r18 (1-based, row-major, r1..r6 on the top row) that are bright
/// in the echogenicity template.
pub const WHITE_CELLS: [usize; 7] = [1, 2, 3, 4, 6, 7, 9];

/// Half-open pixel span of grid cell `i` out of `cells` along an axis of
/// `len` pixels. The final cell absorbs the remainder.
pub fn cell_span(len: usize, cells: usize, i: usize) -> (usize, usize) {
    let step = len / cells;
    let start = i * step;
    let end = if i + 1 == cells { len } else { start + step };
    (start, end)
}

/// 1-based row-major cell number containing pixel `(x, y)`.
pub fn cell_of(width: usize, height: usize, x: usize, y: usize) -> usize {
    let col = (x / (width / GRID_COLS)).min(GRID_COLS - 1);
    let row = (y / (height / GRID_ROWS)).min(GRID_ROWS - 1);
    row * GRID_COLS + col + 1
}

/// The 3x6 template of hyperechoic fat around the sheath: cells
/// r1-r4, r6, r7 and r9 are 255, the rest 0.
pub fn make_template(width: usize, height: usize) -> Result<BinaryMask> {
    if width < MIN_WIDTH || height < MIN_HEIGHT {
        return Err(Error::param(
            "template size",
            format!("{width}x{height} is smaller than {MIN_WIDTH}x{MIN_HEIGHT}"),
        ));
    }
    Ok(BinaryMask::from_predicate(width, height, |x, y| {
        WHITE_CELLS.contains(&cell_of(width, height, x, y))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    // enumerate the cell rectangles and sum the white ones
    fn brute_force_white(width: usize, height: usize) -> usize {
        let mut total = 0;
        for r in 0..GRID_ROWS {
            for c in 0..GRID_COLS {
                if WHITE_CELLS.contains(&(r * GRID_COLS + c + 1)) {
                    let (y0, y1) = cell_span(height, GRID_ROWS, r);
                    let (x0, x1) = cell_span(width, GRID_COLS, c);
                    total += (y1 - y0) * (x1 - x0);
                }
            }
        }
        total
    }

    #[test]
    fn minimal_template_has_one_pixel_per_white_cell() {
        let t = make_template(6, 3).unwrap();
        assert_eq!(t.count_on(), 7);
        // top row: r1..r4 and r6 white, r5 black
        let top: Vec<bool> = (0..6).map(|x| t.is_on(x, 0)).collect();
        assert_eq!(top, vec![true, true, true, true, false, true]);
        let mid: Vec<bool> = (0..6).map(|x| t.is_on(x, 1)).collect();
        assert_eq!(mid, vec![true, false, true, false, false, false]);
        assert!((0..6).all(|x| !t.is_on(x, 2)));
    }

    #[test]
    fn uniform_cells() {
        assert_eq!(make_template(12, 6).unwrap().count_on(), 28);
    }

    #[test]
    fn remainder_absorbed_by_last_cells() {
        let t = make_template(13, 7).unwrap();
        assert_eq!(t.count_on(), brute_force_white(13, 7));
        for (w, h) in [(6, 3), (7, 4), (17, 11), (64, 48), (101, 37)] {
            assert_eq!(
                make_template(w, h).unwrap().count_on(),
                brute_force_white(w, h)
            );
        }
    }

    #[test]
    fn white_fraction_is_seven_eighteenths_when_aligned() {
        for k in 1..6 {
            let (w, h) = (6 * k, 3 * (k + 1));
            assert_eq!(make_template(w, h).unwrap().count_on() * 18, 7 * w * h);
        }
    }

    #[test]
    fn undersized_rejected() {
        assert!(make_template(5, 3).is_err());
        assert!(make_template(6, 2).is_err());
    }
}
