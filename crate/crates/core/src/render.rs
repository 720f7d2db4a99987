//! ASCII and SVG depictions of a house with path overlays.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{Cell, House};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RenderFormat {
    Ascii,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlays {
    pub demonstration: bool,
    pub agent_path: bool,
    pub target: bool,
    pub start: bool,
}

impl Default for Overlays {
    fn default() -> Self {
        Overlays {
            demonstration: true,
            agent_path: true,
            target: true,
            start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub format: RenderFormat,
    pub overlays: Overlays,
}

/// What to draw on top of the map. Absent items are skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scene {
    pub start: Option<Cell>,
    pub target: Option<Cell>,
    pub demonstration: Option<Vec<Cell>>,
    pub agent_paths: Vec<Vec<Cell>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("no overlay selected")]
    NoOverlay,
    #[error("cell {0} lies outside the grid")]
    CellOutsideGrid(Cell),
}

const CELL_PX: i64 = 16;

pub fn render(house: &House, scene: &Scene, spec: &RenderSpec) -> Result<String, RenderError> {
    let o = spec.overlays;
    if !(o.demonstration || o.agent_path || o.target || o.start) {
        return Err(RenderError::NoOverlay);
    }
    let grid = house.grid();
    let all = scene
        .start
        .iter()
        .chain(scene.target.iter())
        .chain(scene.demonstration.iter().flatten())
        .chain(scene.agent_paths.iter().flatten());
    for &c in all {
        if !grid.contains(c) {
            return Err(RenderError::CellOutsideGrid(c));
        }
    }
    Ok(match spec.format {
        RenderFormat::Ascii => ascii(house, scene, o),
        RenderFormat::Svg => svg(house, scene, o),
    })
}

fn ascii(house: &House, scene: &Scene, o: Overlays) -> String {
    let grid = house.grid();
    let (w, h) = (grid.width() as i32, grid.height() as i32);
    let mut rows = vec![vec![' '; w as usize]; h as usize];
    for r in 0..h {
        for c in 0..w {
            rows[r as usize][c as usize] = if grid.is_reachable(Cell::new(c, r)) { '.' } else { '#' };
        }
    }
    let mut put = |cell: Cell, ch: char| rows[cell.row as usize][cell.col as usize] = ch;
    if o.agent_path {
        for p in &scene.agent_paths {
            p.iter().for_each(|&c| put(c, '+'));
        }
    }
    if o.demonstration {
        if let Some(p) = &scene.demonstration {
            p.iter().for_each(|&c| put(c, '*'));
        }
    }
    if o.target {
        if let Some(t) = scene.target {
            put(t, 'T');
        }
    }
    if o.start {
        if let Some(s) = scene.start {
            put(s, 'S');
        }
    }
    let mut out = String::with_capacity(((w + 1) * h) as usize);
    for row in rows.iter().rev() {
        out.extend(row.iter());
        out.push('\n');
    }
    out
}

fn center_px(cell: Cell, h: i64) -> (i64, i64) {
    (
        cell.col as i64 * CELL_PX + CELL_PX / 2,
        (h - 1 - cell.row as i64) * CELL_PX + CELL_PX / 2,
    )
}

fn polyline(id: &str, cells: &[Cell], h: i64, color: &str) -> String {
    let pts: Vec<String> = cells
        .iter()
        .map(|&c| {
            let (x, y) = center_px(c, h);
            format!("{x},{y}")
        })
        .collect();
    format!(
        "<polyline id=\"{id}\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
        pts.join(" ")
    )
}

fn svg(house: &House, scene: &Scene, o: Overlays) -> String {
    let grid = house.grid();
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        w * CELL_PX,
        h * CELL_PX,
        w * CELL_PX,
        h * CELL_PX
    );
    s.push_str("<g id=\"cells\">\n");
    for r in (0..h).rev() {
        for c in 0..w {
            let cell = Cell::new(c as i32, r as i32);
            let fill = if grid.is_reachable(cell) { "#f4f4f4" } else { "#404040" };
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"{CELL_PX}\" height=\"{CELL_PX}\" fill=\"{fill}\"/>",
                c * CELL_PX,
                (h - 1 - r) * CELL_PX
            );
        }
    }
    s.push_str("</g>\n");
    if o.agent_path {
        for (i, p) in scene.agent_paths.iter().enumerate() {
            s.push_str(&polyline(&format!("agent-{i}"), p, h, "#d95f02"));
        }
    }
    if o.demonstration {
        if let Some(p) = &scene.demonstration {
            s.push_str(&polyline("demonstration", p, h, "#1b9e77"));
        }
    }
    let marker = |s: &mut String, id: &str, cell: Cell, color: &str| {
        let (x, y) = center_px(cell, h);
        let _ = writeln!(s, "<circle id=\"{id}\" cx=\"{x}\" cy=\"{y}\" r=\"5\" fill=\"{color}\"/>");
    };
    if o.target {
        if let Some(t) = scene.target {
            marker(&mut s, "target", t, "#e7298a");
        }
    }
    if o.start {
        if let Some(st) = scene.start {
            marker(&mut s, "start", st, "#7570b3");
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Cells of the `<polyline id="...">` in an SVG produced by [`render`].
pub fn parse_polyline(svg: &str, id: &str, height: u32) -> Option<Vec<Cell>> {
    let re = regex::Regex::new(&format!(r#"<polyline id="{}" points="([^"]*)""#, regex::escape(id))).ok()?;
    let pts = re.captures(svg)?.get(1)?.as_str();
    pts.split_whitespace()
        .map(|p| {
            let (x, y) = p.split_once(',')?;
            let (x, y): (i64, i64) = (x.parse().ok()?, y.parse().ok()?);
            let col = (x - CELL_PX / 2) / CELL_PX;
            let row = height as i64 - 1 - (y - CELL_PX / 2) / CELL_PX;
            Some(Cell::new(col as i32, row as i32))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{GridMap, Pose, Room, Rotation};
    use crate::taxonomy::SceneCategory;

    fn house() -> House {
        let cells: Vec<Cell> = (0..4)
            .flat_map(|r| (0..5).map(move |c| Cell::new(c, r)))
            .filter(|&c| c != Cell::new(2, 1) && c != Cell::new(2, 2))
            .collect();
        let grid = GridMap::new(5, 4, (0, 0), cells).unwrap();
        let rooms = vec![Room {
            name: "r".into(),
            min_cell: Cell::new(0, 0),
            max_cell: Cell::new(4, 3),
        }];
        House::new("h", "closet", SceneCategory::Home, grid, rooms, vec![]).unwrap()
    }

    fn spec(format: RenderFormat) -> RenderSpec {
        RenderSpec { format, overlays: Overlays::default() }
    }

    #[test]
    fn markers_only() {
        let s = Scene {
            start: Some(Cell::new(0, 0)),
            target: Some(Cell::new(4, 3)),
            ..Default::default()
        };
        let out = render(&house(), &s, &spec(RenderFormat::Ascii)).unwrap();
        assert_eq!(out, "....T\n..#..\n..#..\nS....\n");
    }

    #[test]
    fn overlays_and_errors() {
        let h = house();
        let path = crate::planner::plan_shortest_path(h.grid(), Pose::new(Cell::new(0, 1), Rotation::East), Cell::new(4, 1)).unwrap();
        let s = Scene {
            start: Some(Cell::new(0, 1)),
            target: None,
            demonstration: Some(path.cells.clone()),
            agent_paths: vec![vec![Cell::new(0, 1), Cell::new(0, 2)]],
        };
        let out = render(&h, &s, &spec(RenderFormat::Ascii)).unwrap();
        assert!(out.contains('*') && out.contains('+') && out.contains('S'));
        let svg = render(&h, &s, &spec(RenderFormat::Svg)).unwrap();
        assert_eq!(parse_polyline(&svg, "demonstration", 4).unwrap(), path.cells);
        assert_eq!(svg, render(&h, &s, &spec(RenderFormat::Svg)).unwrap());

        let none = RenderSpec {
            format: RenderFormat::Ascii,
            overlays: Overlays { demonstration: false, agent_path: false, target: false, start: false },
        };
        assert_eq!(render(&h, &s, &none), Err(RenderError::NoOverlay));
        let outside = Scene { start: Some(Cell::new(9, 0)), ..Default::default() };
        assert_eq!(
            render(&h, &outside, &spec(RenderFormat::Ascii)),
            Err(RenderError::CellOutsideGrid(Cell::new(9, 0)))
        );
    }
}
