use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};

use super::state::Action;

/// What occupies a single maze cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Floor,
    Wall,
    Pillar,
    Goal,
    Start,
}

impl CellKind {
    /// Number of distinct kinds, used as the one-hot block size in observations.
    pub const COUNT: usize = 5;

    pub fn from_glyph(c: char) -> Option<Self> {
        match c {
            '.' => Some(CellKind::Floor),
            '#' => Some(CellKind::Wall),
            'P' => Some(CellKind::Pillar),
            'G' => Some(CellKind::Goal),
            'S' => Some(CellKind::Start),
            _ => None,
        }
    }

    pub fn glyph(self) -> char {
        match self {
            CellKind::Floor => '.',
            CellKind::Wall => '#',
            CellKind::Pillar => 'P',
            CellKind::Goal => 'G',
            CellKind::Start => 'S',
        }
    }

    pub fn is_walkable(self) -> bool {
        matches!(self, CellKind::Floor | CellKind::Goal | CellKind::Start)
    }

    pub fn index(self) -> usize {
        match self {
            CellKind::Floor => 0,
            CellKind::Wall => 1,
            CellKind::Pillar => 2,
            CellKind::Goal => 3,
            CellKind::Start => 4,
        }
    }
}

/// A validated rectangular maze with exactly one start and one goal that are
/// connected by a walkable path.
///
/// Coordinates are `(x, z)` with `x` the column and `z` the row, row 0 being
/// the first line of the map text. North is towards row 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    name: String,
    width: usize,
    height: usize,
    cells: Vec<CellKind>,
    start: (usize, usize),
    goal: (usize, usize),
}

const EASY: &str = include_str!("../../maps/easy.map");
const HARD: &str = include_str!("../../maps/hard.map");

/// Names of the maps compiled into the crate.
pub const BUNDLED_MAPS: [&str; 2] = ["easy", "hard"];

impl GridMap {
    /// Parses the text map format: one row per line using the legend
    /// `.` floor, `#` wall, `P` pillar, `S` start, `G` goal.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let map = Self::parse_layout(name, text)?;
        if map.distances_to_goal()[map.flat(map.start)].is_none() {
            return Err(Error::NoPath);
        }
        Ok(map)
    }

    /// Parses without the connectivity check.
    pub(crate) fn parse_layout(name: impl Into<String>, text: &str) -> Result<Self> {
        let rows: Vec<&str> = text
            .strip_suffix('\n')
            .unwrap_or(text)
            .split('\n')
            .collect();
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::MalformedMap("map is empty".into()));
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut cells = Vec::with_capacity(width * height);
        let mut starts = Vec::new();
        let mut goals = Vec::new();
        for (z, row) in rows.iter().enumerate() {
            let len = row.chars().count();
            if len != width {
                return Err(Error::MalformedMap(format!(
                    "row {z} has {len} cells, expected {width}"
                )));
            }
            for (x, c) in row.chars().enumerate() {
                let kind = CellKind::from_glyph(c).ok_or_else(|| {
                    Error::MalformedMap(format!("unknown glyph {c:?} at ({x}, {z})"))
                })?;
                match kind {
                    CellKind::Start => starts.push((x, z)),
                    CellKind::Goal => goals.push((x, z)),
                    _ => {}
                }
                cells.push(kind);
            }
        }
        if starts.len() != 1 || goals.len() != 1 {
            return Err(Error::MissingStartOrGoal(format!(
                "found {} start and {} goal cells",
                starts.len(),
                goals.len()
            )));
        }
        Ok(GridMap {
            name: name.into(),
            width,
            height,
            cells,
            start: starts[0],
            goal: goals[0],
        })
    }

    /// Loads one of [`BUNDLED_MAPS`] by name.
    pub fn bundled(name: &str) -> Option<Self> {
        let text = match name {
            "easy" => EASY,
            "hard" => HARD,
            _ => return None,
        };
        Some(GridMap::parse(name, text).expect("bundled maps are valid"))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    pub fn goal(&self) -> (usize, usize) {
        self.goal
    }

    fn flat(&self, (x, z): (usize, usize)) -> usize {
        z * self.width + x
    }

    /// Cell kind at signed coordinates; anything outside the grid reads as a wall.
    pub fn kind_at(&self, x: i64, z: i64) -> CellKind {
        if x < 0 || z < 0 || x as usize >= self.width || z as usize >= self.height {
            CellKind::Wall
        } else {
            self.cells[z as usize * self.width + x as usize]
        }
    }

    pub fn is_walkable(&self, x: usize, z: usize) -> bool {
        self.kind_at(x as i64, z as i64).is_walkable()
    }

    /// Walkable cells in row-major order.
    pub fn walkable_cells(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|z| (0..self.width).map(move |x| (x, z)))
            .filter(|&(x, z)| self.is_walkable(x, z))
            .collect()
    }

    /// The walkable neighbour reached by `action`, or `None` when blocked.
    pub fn neighbor(&self, (x, z): (usize, usize), action: Action) -> Option<(usize, usize)> {
        let (dx, dz) = action.direction().delta();
        let (nx, nz) = (x as i64 + dx, z as i64 + dz);
        self.kind_at(nx, nz)
            .is_walkable()
            .then_some((nx as usize, nz as usize))
    }

    /// Breadth-first distance from every cell to the goal, row-major; `None`
    /// for walls, pillars and cells that cannot reach the goal.
    pub fn distances_to_goal(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.cells.len()];
        let mut queue = VecDeque::new();
        dist[self.flat(self.goal)] = Some(0);
        queue.push_back(self.goal);
        while let Some(cell) = queue.pop_front() {
            let d = dist[self.flat(cell)].unwrap();
            // Moves are reversible, so forward neighbours are also predecessors.
            for action in Action::ALL {
                if let Some(next) = self.neighbor(cell, action) {
                    let i = self.flat(next);
                    if dist[i].is_none() {
                        dist[i] = Some(d + 1);
                        queue.push_back(next);
                    }
                }
            }
        }
        dist
    }

    /// BFS distance from `cell` to the goal.
    pub fn distance_to_goal(&self, cell: (usize, usize)) -> Option<usize> {
        self.distances_to_goal()[self.flat(cell)]
    }

    /// Number of moves on a shortest start-to-goal path.
    pub fn shortest_path_len(&self) -> usize {
        self.distance_to_goal(self.start)
            .expect("validated maps are connected")
    }

    pub(crate) fn cell_index(&self, cell: (usize, usize)) -> usize {
        self.flat(cell)
    }

    /// Rows of cell kinds, top to bottom.
    pub fn rows(&self) -> Vec<Vec<CellKind>> {
        self.cells.chunks(self.width).map(|r| r.to_vec()).collect()
    }
}

impl fmt::Display for GridMap {
    /// Writes the map back out in the text format, with a trailing newline.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.width) {
            let line: String = row.iter().map(|k| k.glyph()).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_solvable_map() {
        let map = GridMap::parse("line", "S.G").unwrap();
        assert_eq!(map.start(), (0, 0));
        assert_eq!(map.goal(), (2, 0));
        assert_eq!(map.shortest_path_len(), 2);
    }

    #[test]
    fn disconnected_map_is_rejected() {
        assert!(matches!(GridMap::parse("x", "S#G"), Err(Error::NoPath)));
    }

    #[test]
    fn malformed_maps() {
        assert!(matches!(
            GridMap::parse("x", "S.G\n.."),
            Err(Error::MalformedMap(_))
        ));
        assert!(matches!(
            GridMap::parse("x", "S.X"),
            Err(Error::MalformedMap(_))
        ));
        assert!(matches!(
            GridMap::parse("x", "..G"),
            Err(Error::MissingStartOrGoal(_))
        ));
        assert!(matches!(
            GridMap::parse("x", "SSG"),
            Err(Error::MissingStartOrGoal(_))
        ));
        assert!(matches!(GridMap::parse("x", ""), Err(Error::MalformedMap(_))));
    }

    #[test]
    fn trailing_newline_is_optional() {
        let a = GridMap::parse("a", "S.\n.G").unwrap();
        let b = GridMap::parse("a", "S.\n.G\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "S.\n.G\n");
    }

    // Independent check of the authored layouts: flood fill over the raw
    // text rather than the parsed grid.
    fn text_bfs(text: &str) -> (usize, usize) {
        let g: Vec<Vec<char>> = text.lines().map(|l| l.chars().collect()).collect();
        let find = |c| {
            for (z, r) in g.iter().enumerate() {
                if let Some(x) = r.iter().position(|&v| v == c) {
                    return (x as i64, z as i64);
                }
            }
            unreachable!()
        };
        let (s, goal) = (find('S'), find('G'));
        let open = |x: i64, z: i64| {
            z >= 0
                && x >= 0
                && (z as usize) < g.len()
                && (x as usize) < g[0].len()
                && ".SG".contains(g[z as usize][x as usize])
        };
        let mut seen = std::collections::HashMap::new();
        seen.insert(s, 0usize);
        let mut frontier = vec![s];
        while !frontier.is_empty() {
            let mut next = vec![];
            for (x, z) in frontier {
                let d = seen[&(x, z)];
                for (dx, dz) in [(0, -1), (1, 0), (0, 1), (-1, 0)] {
                    let n = (x + dx, z + dz);
                    if open(n.0, n.1) && !seen.contains_key(&n) {
                        seen.insert(n, d + 1);
                        next.push(n);
                    }
                }
            }
            frontier = next;
        }
        let walkable = g.iter().flatten().filter(|c| ".SG".contains(**c)).count();
        (seen[&goal], walkable)
    }

    #[test]
    fn bundled_maps_match_flood_fill() {
        let easy = GridMap::bundled("easy").unwrap();
        assert_eq!((easy.width(), easy.height()), (7, 7));
        assert_eq!(text_bfs(EASY), (easy.shortest_path_len(), easy.walkable_cells().len()));
        assert_eq!(easy.shortest_path_len(), 8);
        assert_eq!(easy.walkable_cells().len(), 13);

        let hard = GridMap::bundled("hard").unwrap();
        assert_eq!((hard.width(), hard.height()), (12, 12));
        assert_eq!(text_bfs(HARD), (hard.shortest_path_len(), hard.walkable_cells().len()));
        assert_eq!(hard.shortest_path_len(), 40);
        assert_eq!(hard.walkable_cells().len(), 49);
    }

    #[test]
    fn hard_map_has_deep_dead_ends() {
        let hard = GridMap::bundled("hard").unwrap();
        let degree = |c: (usize, usize)| {
            Action::ALL
                .iter()
                .filter(|&&a| hard.neighbor(c, a).is_some())
                .count()
        };
        let mut deep = 0;
        for cell in hard.walkable_cells() {
            if degree(cell) != 1 || cell == hard.start() || cell == hard.goal() {
                continue;
            }
            // Walk back from the dead end until the corridor branches.
            let (mut prev, mut cur, mut depth) = (cell, cell, 0);
            loop {
                let next: Vec<_> = Action::ALL
                    .iter()
                    .filter_map(|&a| hard.neighbor(cur, a))
                    .filter(|&n| n != prev)
                    .collect();
                if depth > 0 && degree(cur) != 2 || next.is_empty() {
                    break;
                }
                prev = cur;
                cur = next[0];
                depth += 1;
            }
            if depth >= 2 {
                deep += 1;
            }
        }
        assert!(deep >= 3, "only {deep} dead ends of depth >= 2");
    }

    #[test]
    fn every_pillar_borders_a_corridor() {
        for name in BUNDLED_MAPS {
            let map = GridMap::bundled(name).unwrap();
            for z in 0..map.height() as i64 {
                for x in 0..map.width() as i64 {
                    if map.kind_at(x, z) != CellKind::Pillar {
                        continue;
                    }
                    let near = [(0, -1), (1, 0), (0, 1), (-1, 0)]
                        .iter()
                        .any(|(dx, dz)| map.kind_at(x + dx, z + dz).is_walkable());
                    assert!(near, "{name}: pillar at ({x}, {z}) is buried");
                }
            }
        }
    }
}
