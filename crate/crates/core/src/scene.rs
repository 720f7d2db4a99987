//! Houses, grid maps, poses and object instances.
//!
//! Grid coordinates are integer cell indices and the grid origin is stored in
//! integer quarter-meters, so every cell center has an exact world position.
//! Meters only appear when reading or writing files and when measuring
//! distances to objects, which sit at continuous positions.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::taxonomy::{self, SceneCategory};

/// Edge length of one grid cell in meters.
pub const CELL_SIZE_M: f64 = 0.25;

/// Cardinal facing. North is +y (row + 1), east is +x (col + 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rotation {
    North,
    East,
    South,
    West,
}

impl Rotation {
    /// Fixed expansion order used by the planner.
    pub const ALL: [Rotation; 4] = [
        Rotation::North,
        Rotation::East,
        Rotation::South,
        Rotation::West,
    ];

    pub fn degrees(self) -> u16 {
        match self {
            Rotation::North => 0,
            Rotation::East => 90,
            Rotation::South => 180,
            Rotation::West => 270,
        }
    }

    pub fn from_degrees(degrees: i64) -> Option<Self> {
        match degrees {
            0 => Some(Rotation::North),
            90 => Some(Rotation::East),
            180 => Some(Rotation::South),
            270 => Some(Rotation::West),
            _ => None,
        }
    }

    /// Position in [`Rotation::ALL`].
    pub fn quarter_index(self) -> usize {
        self.index() as usize
    }

    fn index(self) -> u8 {
        match self {
            Rotation::North => 0,
            Rotation::East => 1,
            Rotation::South => 2,
            Rotation::West => 3,
        }
    }

    fn from_index(i: u8) -> Self {
        Self::ALL[(i % 4) as usize]
    }

    /// Clockwise by 90 degrees.
    pub fn right(self) -> Self {
        Self::from_index(self.index() + 1)
    }

    /// Counter-clockwise by 90 degrees.
    pub fn left(self) -> Self {
        Self::from_index(self.index() + 3)
    }

    /// Number of clockwise quarter turns from `self` to `other` (0..=3).
    pub fn quarter_turns_to(self, other: Rotation) -> u8 {
        (other.index() + 4 - self.index()) % 4
    }

    /// Cell displacement of one MoveAhead.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Rotation::North => (0, 1),
            Rotation::East => (1, 0),
            Rotation::South => (0, -1),
            Rotation::West => (-1, 0),
        }
    }

    /// Direction of a unit 4-neighbor displacement.
    pub fn from_delta(dcol: i32, drow: i32) -> Option<Self> {
        match (dcol, drow) {
            (0, 1) => Some(Rotation::North),
            (1, 0) => Some(Rotation::East),
            (0, -1) => Some(Rotation::South),
            (-1, 0) => Some(Rotation::West),
            _ => None,
        }
    }

    /// Lowercase compass name ("north", "east", ...).
    pub fn compass(self) -> &'static str {
        match self {
            Rotation::North => "north",
            Rotation::East => "east",
            Rotation::South => "south",
            Rotation::West => "west",
        }
    }
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

impl Serialize for Rotation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u16(self.degrees())
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let deg = i64::deserialize(d)?;
        Rotation::from_degrees(deg).ok_or_else(|| {
            serde::de::Error::custom(format!("rotation must be 0, 90, 180 or 270, got {deg}"))
        })
    }
}

/// Grid cell index. Serialized as `[col, row]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub col: i32,
    pub row: i32,
}

impl Cell {
    pub const fn new(col: i32, row: i32) -> Self {
        Cell { col, row }
    }

    pub fn step(self, rotation: Rotation) -> Cell {
        let (dc, dr) = rotation.delta();
        Cell::new(self.col + dc, self.row + dr)
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.col.abs_diff(other.col) + self.row.abs_diff(other.row)
    }
}

impl From<[i32; 2]> for Cell {
    fn from(v: [i32; 2]) -> Self {
        Cell::new(v[0], v[1])
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.col, c.row]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.col, self.row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub cell: Cell,
    pub rotation: Rotation,
}

impl Pose {
    pub const fn new(cell: Cell, rotation: Rotation) -> Self {
        Pose { cell, rotation }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("cell {cell} lies outside the {width}x{height} grid")]
    OutOfBounds { cell: Cell, width: u32, height: u32 },
    #[error("grid dimensions must be positive, got {width}x{height}")]
    EmptyGrid { width: u32, height: u32 },
    #[error("reachable cell {0} listed twice")]
    DuplicateCell(Cell),
}

/// Reachability map over a `width x height` lattice of 0.25 m cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: u32,
    height: u32,
    origin_q: (i64, i64),
    reachable: Vec<bool>,
    /// Reachable cells in (row, col) order.
    cells: Vec<Cell>,
}

impl GridMap {
    /// `origin_q` is the world position of cell (0, 0) in quarter-meters.
    pub fn new(
        width: u32,
        height: u32,
        origin_q: (i64, i64),
        reachable: impl IntoIterator<Item = Cell>,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::EmptyGrid { width, height });
        }
        let mut map = vec![false; width as usize * height as usize];
        let mut cells = Vec::new();
        for cell in reachable {
            let idx = index_of(width, height, cell).ok_or(GridError::OutOfBounds {
                cell,
                width,
                height,
            })?;
            if map[idx] {
                return Err(GridError::DuplicateCell(cell));
            }
            map[idx] = true;
            cells.push(cell);
        }
        cells.sort_by_key(|c| (c.row, c.col));
        Ok(GridMap {
            width,
            height,
            origin_q,
            reachable: map,
            cells,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn origin_quarters(&self) -> (i64, i64) {
        self.origin_q
    }

    pub fn origin_m(&self) -> (f64, f64) {
        (self.origin_q.0 as f64 * CELL_SIZE_M, self.origin_q.1 as f64 * CELL_SIZE_M)
    }

    pub fn index(&self, cell: Cell) -> Option<usize> {
        index_of(self.width, self.height, cell)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.index(cell).is_some()
    }

    pub fn is_reachable(&self, cell: Cell) -> bool {
        self.index(cell).is_some_and(|i| self.reachable[i])
    }

    /// Reachable cells sorted by (row, col).
    pub fn reachable_cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn reachable_count(&self) -> usize {
        self.cells.len()
    }

    /// World position of a cell center in meters.
    pub fn cell_to_world(&self, cell: Cell) -> Result<(f64, f64), GridError> {
        if !self.contains(cell) {
            return Err(GridError::OutOfBounds {
                cell,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.center_unchecked(cell))
    }

    pub(crate) fn center_unchecked(&self, cell: Cell) -> (f64, f64) {
        (
            (self.origin_q.0 + cell.col as i64) as f64 * CELL_SIZE_M,
            (self.origin_q.1 + cell.row as i64) as f64 * CELL_SIZE_M,
        )
    }

    /// Cell whose square contains the world point, clamped into the grid.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Cell {
        let (ox, oy) = self.origin_m();
        let col = ((x - ox) / CELL_SIZE_M + 0.5).floor() as i64;
        let row = ((y - oy) / CELL_SIZE_M + 0.5).floor() as i64;
        Cell::new(
            col.clamp(0, self.width as i64 - 1) as i32,
            row.clamp(0, self.height as i64 - 1) as i32,
        )
    }

    /// Inclusive world-space bounds `((min_x, min_y), (max_x, max_y))` covered by the cells.
    pub fn world_bounds(&self) -> ((f64, f64), (f64, f64)) {
        let (ox, oy) = self.origin_m();
        let half = CELL_SIZE_M / 2.0;
        (
            (ox - half, oy - half),
            (
                ox + self.width as f64 * CELL_SIZE_M - half,
                oy + self.height as f64 * CELL_SIZE_M - half,
            ),
        )
    }

    pub fn in_world_bounds(&self, x: f64, y: f64) -> bool {
        let ((x0, y0), (x1, y1)) = self.world_bounds();
        x.is_finite() && y.is_finite() && x >= x0 && x <= x1 && y >= y0 && y <= y1
    }
}

fn index_of(width: u32, height: u32, cell: Cell) -> Option<usize> {
    if cell.col < 0 || cell.row < 0 || cell.col as u32 >= width || cell.row as u32 >= height {
        None
    } else {
        Some(cell.row as usize * width as usize + cell.col as usize)
    }
}

/// Axis-aligned room rectangle, inclusive on both corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub name: String,
    pub min_cell: Cell,
    pub max_cell: Cell,
}

impl Room {
    pub fn contains(&self, cell: Cell) -> bool {
        cell.col >= self.min_cell.col
            && cell.col <= self.max_cell.col
            && cell.row >= self.min_cell.row
            && cell.row <= self.max_cell.row
    }

    pub fn area_cells(&self) -> u64 {
        let w = (self.max_cell.col - self.min_cell.col + 1).max(0) as u64;
        let h = (self.max_cell.row - self.min_cell.row + 1).max(0) as u64;
        w * h
    }

    pub fn area_m2(&self) -> f64 {
        self.area_cells() as f64 * CELL_SIZE_M * CELL_SIZE_M
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectInstance {
    pub id: String,
    pub category: String,
    /// World position in meters; not snapped to the grid.
    pub position: [f64; 2],
    pub height_m: f64,
    pub opaque: bool,
}

#[derive(Debug, Error)]
pub enum HouseError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("unknown scene type {value:?} at `{field}`")]
    UnknownSceneType { field: String, value: String },
    #[error("scene type {scene_type:?} belongs to {expected}, not {found:?}")]
    CategoryMismatch {
        scene_type: String,
        expected: SceneCategory,
        found: String,
    },
    #[error("object {id:?} at `{field}` lies outside the grid bounds")]
    ObjectOutOfBounds { field: String, id: String },
    #[error("duplicate object id {id:?} at `{field}`")]
    DuplicateObjectId { field: String, id: String },
}

impl HouseError {
    fn schema(field: impl Into<String>, message: impl fmt::Display) -> Self {
        HouseError::Schema {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

/// A validated, immutable scene.
#[derive(Debug, Clone, PartialEq)]
pub struct House {
    id: String,
    scene_type: String,
    scene_category: SceneCategory,
    grid: GridMap,
    rooms: Vec<Room>,
    objects: Vec<ObjectInstance>,
    /// Per-cell vision blocking, indexed like the grid.
    blocking: Vec<bool>,
}

impl House {
    pub fn new(
        id: impl Into<String>,
        scene_type: impl Into<String>,
        scene_category: SceneCategory,
        grid: GridMap,
        rooms: Vec<Room>,
        objects: Vec<ObjectInstance>,
    ) -> Result<Self, HouseError> {
        let scene_type = scene_type.into();
        match taxonomy::category_of(&scene_type) {
            None => {
                return Err(HouseError::UnknownSceneType {
                    field: "scene_type".into(),
                    value: scene_type,
                })
            }
            Some(c) if c != scene_category => {
                return Err(HouseError::CategoryMismatch {
                    scene_type,
                    expected: c,
                    found: scene_category.name().to_string(),
                })
            }
            Some(_) => {}
        }
        for (i, room) in rooms.iter().enumerate() {
            for (name, cell) in [("min_cell", room.min_cell), ("max_cell", room.max_cell)] {
                if !grid.contains(cell) {
                    return Err(HouseError::schema(
                        format!("rooms[{i}].{name}"),
                        format!("cell {cell} outside grid"),
                    ));
                }
            }
            if room.min_cell.col > room.max_cell.col || room.min_cell.row > room.max_cell.row {
                return Err(HouseError::schema(
                    format!("rooms[{i}]"),
                    "min_cell must not exceed max_cell",
                ));
            }
        }
        let mut seen = HashSet::new();
        for (i, obj) in objects.iter().enumerate() {
            let field = format!("objects[{i}]");
            if !seen.insert(obj.id.as_str()) {
                return Err(HouseError::DuplicateObjectId {
                    field: format!("{field}.id"),
                    id: obj.id.clone(),
                });
            }
            if !(obj.height_m.is_finite() && obj.height_m >= 0.0) {
                return Err(HouseError::schema(
                    format!("{field}.height_m"),
                    format!("height must be finite and >= 0, got {}", obj.height_m),
                ));
            }
            if !grid.in_world_bounds(obj.position[0], obj.position[1]) {
                return Err(HouseError::ObjectOutOfBounds {
                    field: format!("{field}.position"),
                    id: obj.id.clone(),
                });
            }
        }

        let mut blocking = vec![false; grid.width() as usize * grid.height() as usize];
        for row in 0..grid.height() as i32 {
            for col in 0..grid.width() as i32 {
                let cell = Cell::new(col, row);
                if !grid.is_reachable(cell) && !rooms.iter().any(|r| r.contains(cell)) {
                    blocking[grid.index(cell).unwrap()] = true;
                }
            }
        }
        for obj in objects.iter().filter(|o| o.opaque) {
            let cell = grid.world_to_cell(obj.position[0], obj.position[1]);
            if !grid.is_reachable(cell) {
                blocking[grid.index(cell).unwrap()] = true;
            }
        }

        Ok(House {
            id: id.into(),
            scene_type,
            scene_category,
            grid,
            rooms,
            objects,
            blocking,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn scene_type(&self) -> &str {
        &self.scene_type
    }

    pub fn scene_category(&self) -> SceneCategory {
        self.scene_category
    }

    pub fn grid(&self) -> &GridMap {
        &self.grid
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Cell containing an object's position.
    pub fn object_cell(&self, obj: &ObjectInstance) -> Cell {
        self.grid.world_to_cell(obj.position[0], obj.position[1])
    }

    /// True for cells that stop line of sight: unreachable cells outside every
    /// room (walls) and unreachable cells holding an opaque object.
    pub fn blocks_vision(&self, cell: Cell) -> bool {
        self.grid.index(cell).is_some_and(|i| self.blocking[i])
    }

    pub fn from_json_str(text: &str) -> Result<Self, HouseError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: HouseFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            HouseError::schema(field, e.into_inner())
        })?;
        file.into_house()
    }

    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(&HouseFile::from_house(self))
            .expect("house serialization is infallible");
        text.push('\n');
        text
    }
}

/// Reads and validates a house file.
pub fn load_house(path: impl AsRef<Path>) -> Result<House, HouseError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| HouseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    House::from_json_str(&text)
}

pub fn save_house(house: &House, path: impl AsRef<Path>) -> Result<(), HouseError> {
    let path = path.as_ref();
    fs::write(path, house.to_json_string()).map_err(|source| HouseError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HouseFile {
    id: String,
    scene_type: String,
    scene_category: String,
    grid: GridFile,
    rooms: Vec<Room>,
    objects: Vec<ObjectInstance>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    cell_size_m: f64,
    width: u32,
    height: u32,
    origin: [f64; 2],
    reachable: Vec<[i32; 2]>,
}

impl HouseFile {
    fn into_house(self) -> Result<House, HouseError> {
        if self.grid.cell_size_m != CELL_SIZE_M {
            return Err(HouseError::schema(
                "grid.cell_size_m",
                format!("cell size must be {CELL_SIZE_M}, got {}", self.grid.cell_size_m),
            ));
        }
        let mut origin_q = [0i64; 2];
        for (i, v) in self.grid.origin.iter().enumerate() {
            let q = v / CELL_SIZE_M;
            if !q.is_finite() || q.fract() != 0.0 || q.abs() > 1e12 {
                return Err(HouseError::schema(
                    format!("grid.origin[{i}]"),
                    format!("origin must be a multiple of 0.25 m, got {v}"),
                ));
            }
            origin_q[i] = q as i64;
        }
        let scene_category = SceneCategory::from_name(&self.scene_category).ok_or_else(|| {
            HouseError::schema(
                "scene_category",
                format!("unknown scene category {:?}", self.scene_category),
            )
        })?;
        let grid = GridMap::new(
            self.grid.width,
            self.grid.height,
            (origin_q[0], origin_q[1]),
            self.grid.reachable.iter().map(|&c| Cell::from(c)),
        )
        .map_err(|e| HouseError::schema("grid.reachable", e))?;
        House::new(
            self.id,
            self.scene_type,
            scene_category,
            grid,
            self.rooms,
            self.objects,
        )
    }

    fn from_house(house: &House) -> Self {
        let (ox, oy) = house.grid.origin_m();
        HouseFile {
            id: house.id.clone(),
            scene_type: house.scene_type.clone(),
            scene_category: house.scene_category.name().to_string(),
            grid: GridFile {
                cell_size_m: CELL_SIZE_M,
                width: house.grid.width,
                height: house.grid.height,
                origin: [ox, oy],
                reachable: house.grid.cells.iter().map(|&c| c.into()).collect(),
            },
            rooms: house.rooms.clone(),
            objects: house.objects.clone(),
        }
    }
}
