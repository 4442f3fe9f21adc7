//! Partially observable restaurant world: rooms, adjacency, restaurant
//! placement and the visibility relation, plus the observed-trajectory
//! corpus.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_ENVIRONMENT: &str = include_str!("../data/restaurants.toml");
const DEFAULT_TRAJECTORIES: &str = include_str!("../data/trajectories.toml");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment: {0}")]
    Validation(String),
    #[error("unknown room {0}")]
    UnknownRoom(RoomId),
    #[error("unknown restaurant {0:?}")]
    UnknownRestaurant(String),
    #[error("{to} is unreachable from {from}")]
    Unreachable { from: RoomId, to: String },
    #[error("unknown trajectory {0:?}")]
    UnknownTrajectory(String),
    #[error("illegal action {action} at step {step} (agent in {room})")]
    IllegalAction {
        step: usize,
        room: RoomId,
        action: Action,
    },
    #[error("cannot parse {what}: {message}")]
    Parse { what: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomId(pub u32);

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Room {}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Restaurant(String);

impl Restaurant {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Restaurant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Move(RoomId),
    Eat(Restaurant),
}

impl Action {
    /// Prompt-facing phrasing.
    pub fn describe(&self) -> String {
        match self {
            Action::Move(room) => format!("Move to {room}"),
            Action::Eat(r) => format!("Eat at the {r} restaurant"),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Move(room) => write!(f, "Move({})", room.0),
            Action::Eat(r) => write!(f, "Eat({r})"),
        }
    }
}

/// On-disk environment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    #[serde(default)]
    pub name: String,
    pub rooms: Vec<u32>,
    /// Declared neighbour lists. Rooms absent from this map connect back to
    /// every room that lists them.
    #[serde(default)]
    pub adjacency: BTreeMap<String, Vec<u32>>,
    #[serde(default)]
    pub restaurants: Vec<RestaurantSpec>,
    #[serde(default)]
    pub visibility: BTreeMap<String, Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestaurantSpec {
    pub name: String,
    pub room: u32,
}

impl EnvironmentSpec {
    pub fn from_toml(text: &str) -> Result<Self, EnvError> {
        toml::from_str(text).map_err(|e| EnvError::Parse {
            what: "environment".into(),
            message: e.to_string(),
        })
    }

    /// The seven-room food court with Chinese, Mexican and Japanese
    /// restaurants in rooms 3, 5 and 7.
    pub fn food_court() -> Self {
        Self::from_toml(DEFAULT_ENVIRONMENT).expect("bundled environment parses")
    }
}

/// Validated, immutable environment graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomGraph {
    name: String,
    rooms: Vec<RoomId>,
    adjacency: BTreeMap<RoomId, BTreeSet<RoomId>>,
    restaurants: Vec<(Restaurant, RoomId)>,
    visible_from: BTreeMap<Restaurant, BTreeSet<RoomId>>,
}

pub fn build_environment(spec: &EnvironmentSpec) -> Result<RoomGraph, EnvError> {
    let invalid = |msg: String| Err(EnvError::Validation(msg));

    let mut rooms = BTreeSet::new();
    for &r in &spec.rooms {
        if !rooms.insert(RoomId(r)) {
            return invalid(format!("room {r} listed twice"));
        }
    }
    if rooms.is_empty() {
        return invalid("no rooms".into());
    }

    let mut declared: BTreeMap<RoomId, BTreeSet<RoomId>> = BTreeMap::new();
    for (key, targets) in &spec.adjacency {
        let room = key
            .trim()
            .parse::<u32>()
            .map(RoomId)
            .map_err(|_| EnvError::Validation(format!("adjacency key {key:?} is not a room")))?;
        if !rooms.contains(&room) {
            return invalid(format!("adjacency lists unknown room {}", room.0));
        }
        let mut set = BTreeSet::new();
        for &t in targets {
            let t = RoomId(t);
            if !rooms.contains(&t) {
                return invalid(format!("{room} connects to unknown room {}", t.0));
            }
            if t == room {
                return invalid(format!("{room} connects to itself"));
            }
            set.insert(t);
        }
        declared.insert(room, set);
    }

    let mut adjacency: BTreeMap<RoomId, BTreeSet<RoomId>> =
        rooms.iter().map(|&r| (r, BTreeSet::new())).collect();
    for (&a, targets) in &declared {
        for &b in targets {
            if let Some(back) = declared.get(&b) {
                if !back.contains(&a) {
                    return invalid(format!("{a} connects to {b} but not the reverse"));
                }
            }
            adjacency.get_mut(&a).unwrap().insert(b);
            adjacency.get_mut(&b).unwrap().insert(a);
        }
    }

    let mut restaurants = Vec::new();
    let mut seen = BTreeSet::new();
    for r in &spec.restaurants {
        if !seen.insert(r.name.clone()) {
            return invalid(format!("restaurant {:?} placed twice", r.name));
        }
        if !rooms.contains(&RoomId(r.room)) {
            return invalid(format!("restaurant {:?} is in unknown room {}", r.name, r.room));
        }
        restaurants.push((Restaurant::new(&r.name), RoomId(r.room)));
    }

    let mut visible_from: BTreeMap<Restaurant, BTreeSet<RoomId>> = BTreeMap::new();
    for (name, from) in &spec.visibility {
        if !seen.contains(name) {
            return invalid(format!("visibility refers to unknown restaurant {name:?}"));
        }
        let mut set = BTreeSet::new();
        for &room in from {
            if !rooms.contains(&RoomId(room)) {
                return invalid(format!("{name} visible from unknown room {room}"));
            }
            set.insert(RoomId(room));
        }
        visible_from.insert(Restaurant::new(name), set);
    }
    for (r, room) in &restaurants {
        let own = visible_from.get(r).is_some_and(|s| s.contains(room));
        if !own {
            return invalid(format!("{r} is not visible from its own room {}", room.0));
        }
    }

    let graph = RoomGraph {
        name: spec.name.clone(),
        rooms: rooms.into_iter().collect(),
        adjacency,
        restaurants,
        visible_from,
    };
    if !graph.is_connected() {
        return invalid("room graph is not connected".into());
    }
    Ok(graph)
}

impl RoomGraph {
    /// The built-in seven-room environment.
    pub fn food_court() -> Self {
        build_environment(&EnvironmentSpec::food_court()).expect("bundled environment is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rooms(&self) -> &[RoomId] {
        &self.rooms
    }

    pub fn contains(&self, room: RoomId) -> bool {
        self.adjacency.contains_key(&room)
    }

    /// Neighbours in ascending room order.
    pub fn neighbors(&self, room: RoomId) -> Result<impl Iterator<Item = RoomId> + '_, EnvError> {
        self.adjacency
            .get(&room)
            .map(|s| s.iter().copied())
            .ok_or(EnvError::UnknownRoom(room))
    }

    pub fn is_adjacent(&self, a: RoomId, b: RoomId) -> bool {
        self.adjacency.get(&a).is_some_and(|s| s.contains(&b))
    }

    /// Restaurants in declaration order.
    pub fn restaurants(&self) -> impl ExactSizeIterator<Item = &Restaurant> + '_ {
        self.restaurants.iter().map(|(r, _)| r)
    }

    pub fn restaurant_count(&self) -> usize {
        self.restaurants.len()
    }

    pub fn restaurant(&self, name: &str) -> Option<&Restaurant> {
        self.restaurants().find(|r| r.name() == name)
    }

    pub fn room_of(&self, restaurant: &Restaurant) -> Option<RoomId> {
        self.restaurants
            .iter()
            .find(|(r, _)| r == restaurant)
            .map(|&(_, room)| room)
    }

    pub fn restaurants_at(&self, room: RoomId) -> impl Iterator<Item = &Restaurant> + '_ {
        self.restaurants
            .iter()
            .filter(move |&&(_, at)| at == room)
            .map(|(r, _)| r)
    }

    pub fn visible_from(&self, restaurant: &Restaurant) -> Option<&BTreeSet<RoomId>> {
        self.visible_from.get(restaurant)
    }

    pub fn is_visible(&self, restaurant: &Restaurant, room: RoomId) -> bool {
        self.visible_from
            .get(restaurant)
            .is_some_and(|s| s.contains(&room))
    }

    fn is_connected(&self) -> bool {
        let start = self.rooms[0];
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(r) = queue.pop_front() {
            for &n in &self.adjacency[&r] {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen.len() == self.rooms.len()
    }

    fn check_room(&self, room: RoomId) -> Result<(), EnvError> {
        if self.contains(room) {
            Ok(())
        } else {
            Err(EnvError::UnknownRoom(room))
        }
    }
}

/// Ground-truth open/closed status of every restaurant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    open: BTreeMap<Restaurant, bool>,
}

impl WorldState {
    pub fn all_open(graph: &RoomGraph) -> Self {
        Self {
            open: graph.restaurants().map(|r| (r.clone(), true)).collect(),
        }
    }

    pub fn with_closed<S: AsRef<str>>(graph: &RoomGraph, closed: &[S]) -> Result<Self, EnvError> {
        let mut world = Self::all_open(graph);
        for name in closed {
            let name = name.as_ref();
            match world.open.get_mut(&Restaurant::new(name)) {
                Some(flag) => *flag = false,
                None => return Err(EnvError::UnknownRestaurant(name.to_string())),
            }
        }
        Ok(world)
    }

    /// All 2^n open/closed assignments.
    pub fn enumerate(graph: &RoomGraph) -> Vec<Self> {
        let names: Vec<_> = graph.restaurants().cloned().collect();
        (0..1u64 << names.len())
            .map(|mask| Self {
                open: names
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (r.clone(), mask & (1 << i) == 0))
                    .collect(),
            })
            .collect()
    }

    pub fn is_open(&self, restaurant: &Restaurant) -> bool {
        self.open.get(restaurant).copied().unwrap_or(false)
    }

    pub fn closed(&self) -> impl Iterator<Item = &Restaurant> + '_ {
        self.open.iter().filter(|(_, &o)| !o).map(|(r, _)| r)
    }
}

/// What the agent perceives from a room.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub room: RoomId,
    /// Visible restaurants with their true status, in declaration order.
    pub visible: Vec<(Restaurant, bool)>,
    pub reachable: Vec<RoomId>,
}

/// Moves to adjacent rooms in ascending order, then `Eat` for each open
/// restaurant in the room.
pub fn legal_actions(
    graph: &RoomGraph,
    world: &WorldState,
    room: RoomId,
) -> Result<Vec<Action>, EnvError> {
    let mut actions: Vec<Action> = graph.neighbors(room)?.map(Action::Move).collect();
    actions.extend(
        graph
            .restaurants_at(room)
            .filter(|r| world.is_open(r))
            .map(|r| Action::Eat(r.clone())),
    );
    Ok(actions)
}

pub fn observe(graph: &RoomGraph, world: &WorldState, room: RoomId) -> Result<Observation, EnvError> {
    let reachable = graph.neighbors(room)?.collect();
    let visible = graph
        .restaurants()
        .filter(|r| graph.is_visible(r, room))
        .map(|r| (r.clone(), world.is_open(r)))
        .collect();
    Ok(Observation {
        room,
        visible,
        reachable,
    })
}

/// Breadth-first shortest path from `from` to the restaurant's room,
/// excluding `from` itself. Among equally short paths the lexicographically
/// smallest room sequence wins.
pub fn shortest_path(
    graph: &RoomGraph,
    from: RoomId,
    to: &Restaurant,
) -> Result<Vec<RoomId>, EnvError> {
    let target = graph
        .room_of(to)
        .ok_or_else(|| EnvError::UnknownRestaurant(to.name().to_string()))?;
    room_path(graph, from, target).map_err(|e| match e {
        EnvError::Unreachable { from, .. } => EnvError::Unreachable {
            from,
            to: to.name().to_string(),
        },
        other => other,
    })
}

/// Shortest room-to-room path with the same tie-breaking as
/// [`shortest_path`].
pub fn room_path(graph: &RoomGraph, from: RoomId, target: RoomId) -> Result<Vec<RoomId>, EnvError> {
    graph.check_room(from)?;
    graph.check_room(target)?;
    let dist = distances_to(graph, target);
    let unreachable = || EnvError::Unreachable {
        from,
        to: target.to_string(),
    };
    let mut d = *dist.get(&from).ok_or_else(unreachable)?;
    let mut path = Vec::with_capacity(d);
    let mut at = from;
    while d > 0 {
        // Neighbours iterate in ascending order, so the first hit is the
        // lowest-index room one step closer.
        at = graph
            .neighbors(at)?
            .find(|n| dist.get(n) == Some(&(d - 1)))
            .ok_or_else(unreachable)?;
        path.push(at);
        d -= 1;
    }
    Ok(path)
}

fn distances_to(graph: &RoomGraph, target: RoomId) -> BTreeMap<RoomId, usize> {
    let mut dist = BTreeMap::from([(target, 0usize)]);
    let mut queue = VecDeque::from([target]);
    while let Some(r) = queue.pop_front() {
        let d = dist[&r];
        for &n in &graph.adjacency[&r] {
            dist.entry(n).or_insert_with(|| {
                queue.push_back(n);
                d + 1
            });
        }
    }
    dist
}

/// One observed trajectory with the world it happened in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDef {
    pub id: String,
    pub label: String,
    pub world: WorldState,
    pub start_room: RoomId,
    /// Table cells as published.
    pub cells: Vec<String>,
    pub actions: Vec<Action>,
    /// Set when a cell is not reachable in one move from the previous one
    /// and was completed with the shortest legal path.
    pub reconstructed: bool,
}

/// One step of a replayed trajectory, seen from the agent's position before
/// it acts.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayStep {
    pub timestep: usize,
    pub room: RoomId,
    pub observation: Observation,
    pub legal: Vec<Action>,
    pub action: Action,
    /// Position of `action` in `legal`.
    pub action_index: usize,
}

impl TrajectoryDef {
    /// Walks the trajectory, checking every action against the legal set.
    pub fn replay(&self, graph: &RoomGraph) -> Result<Vec<ReplayStep>, EnvError> {
        let mut room = self.start_room;
        let mut steps = Vec::with_capacity(self.actions.len());
        for (t, action) in self.actions.iter().enumerate() {
            let legal = legal_actions(graph, &self.world, room)?;
            let action_index = legal.iter().position(|a| a == action).ok_or_else(|| {
                EnvError::IllegalAction {
                    step: t,
                    room,
                    action: action.clone(),
                }
            })?;
            let observation = observe(graph, &self.world, room)?;
            steps.push(ReplayStep {
                timestep: t,
                room,
                observation,
                legal,
                action: action.clone(),
                action_index,
            });
            if let Action::Move(next) = action {
                room = *next;
            }
        }
        Ok(steps)
    }

    /// Room the agent ends in.
    pub fn final_room(&self) -> RoomId {
        self.actions
            .iter()
            .rev()
            .find_map(|a| match a {
                Action::Move(r) => Some(*r),
                Action::Eat(_) => None,
            })
            .unwrap_or(self.start_room)
    }
}

#[derive(Debug, Deserialize)]
struct CorpusFile {
    start_room: u32,
    trajectory: Vec<CorpusRow>,
}

#[derive(Debug, Deserialize)]
struct CorpusRow {
    id: String,
    cells: Vec<String>,
    #[serde(default)]
    closed: Vec<String>,
    #[serde(default)]
    label: String,
}

/// Encodes a trajectory table into action sequences against `graph`.
pub fn parse_corpus(graph: &RoomGraph, text: &str) -> Result<Vec<TrajectoryDef>, EnvError> {
    let file: CorpusFile = toml::from_str(text).map_err(|e| EnvError::Parse {
        what: "trajectory corpus".into(),
        message: e.to_string(),
    })?;
    let start = RoomId(file.start_room);
    graph.check_room(start)?;
    file.trajectory
        .into_iter()
        .map(|row| {
            let world = WorldState::with_closed(graph, &row.closed)?;
            let (actions, reconstructed) = encode_cells(graph, start, &row.cells)?;
            let traj = TrajectoryDef {
                id: row.id,
                label: row.label,
                world,
                start_room: start,
                cells: row.cells,
                actions,
                reconstructed,
            };
            traj.replay(graph)?;
            Ok(traj)
        })
        .collect()
}

fn encode_cells(
    graph: &RoomGraph,
    start: RoomId,
    cells: &[String],
) -> Result<(Vec<Action>, bool), EnvError> {
    let mut at = start;
    let mut actions = Vec::new();
    let mut reconstructed = false;
    for cell in cells {
        let cell = cell.trim();
        if let Some(n) = cell.strip_prefix("Room ") {
            let room = n.trim().parse::<u32>().map(RoomId).map_err(|_| EnvError::Parse {
                what: "trajectory cell".into(),
                message: format!("{cell:?}"),
            })?;
            if !graph.is_adjacent(at, room) {
                // The published row skips intermediate rooms.
                let path = room_path(graph, at, room)?;
                reconstructed = true;
                actions.extend(path.into_iter().map(Action::Move));
            } else {
                actions.push(Action::Move(room));
            }
            at = room;
        } else {
            let restaurant = graph
                .restaurant(cell)
                .cloned()
                .ok_or_else(|| EnvError::UnknownRestaurant(cell.to_string()))?;
            let path = shortest_path(graph, at, &restaurant)?;
            reconstructed |= path.len() > 1;
            for room in path {
                actions.push(Action::Move(room));
                at = room;
            }
            actions.push(Action::Eat(restaurant));
        }
    }
    Ok((actions, reconstructed))
}

/// The twelve bundled trajectories on the default environment.
pub fn corpus() -> Vec<TrajectoryDef> {
    parse_corpus(&RoomGraph::food_court(), DEFAULT_TRAJECTORIES).expect("bundled corpus is valid")
}

pub fn trajectory_ids() -> Vec<String> {
    corpus().into_iter().map(|t| t.id).collect()
}

pub fn load_trajectory(id: &str) -> Result<TrajectoryDef, EnvError> {
    corpus()
        .into_iter()
        .find(|t| t.id == id)
        .ok_or_else(|| EnvError::UnknownTrajectory(id.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rooms(ids: &[u32]) -> Vec<RoomId> {
        ids.iter().copied().map(RoomId).collect()
    }

    fn spec(text: &str) -> EnvironmentSpec {
        EnvironmentSpec::from_toml(text).unwrap()
    }

    #[test]
    fn default_graph_layout() {
        let g = RoomGraph::food_court();
        assert_eq!(g.rooms(), rooms(&[1, 2, 3, 4, 5, 6, 7]).as_slice());
        let at = |n: &str| g.room_of(g.restaurant(n).unwrap()).unwrap();
        assert_eq!(at("Chinese"), RoomId(3));
        assert_eq!(at("Mexican"), RoomId(5));
        assert_eq!(at("Japanese"), RoomId(7));
        let vis = |n: &str| g.visible_from(g.restaurant(n).unwrap()).unwrap().iter().copied().collect::<Vec<_>>();
        assert_eq!(vis("Chinese"), rooms(&[1, 2, 3, 4]));
        assert_eq!(vis("Mexican"), rooms(&[2, 4, 5, 6]));
        assert_eq!(vis("Japanese"), rooms(&[4, 6, 7]));
        assert_eq!(g.neighbors(RoomId(2)).unwrap().collect::<Vec<_>>(), rooms(&[1, 3, 4]));
        assert_eq!(g.neighbors(RoomId(7)).unwrap().collect::<Vec<_>>(), rooms(&[6]));
    }

    #[test]
    fn single_room_graph_is_valid() {
        let g = build_environment(&spec("rooms = [1]")).unwrap();
        assert_eq!(g.rooms().len(), 1);
        assert_eq!(g.restaurant_count(), 0);
    }

    #[test]
    fn restaurant_without_self_visibility_is_rejected() {
        let s = spec(
            r#"
            rooms = [1, 2]
            [adjacency]
            1 = [2]
            [[restaurants]]
            name = "Thai"
            room = 2
            "#,
        );
        assert!(matches!(build_environment(&s), Err(EnvError::Validation(_))));
    }

    #[test]
    fn asymmetric_and_disconnected_graphs_are_rejected() {
        let asym = spec(
            r#"
            rooms = [1, 2]
            [adjacency]
            1 = [2]
            2 = []
            "#,
        );
        assert!(matches!(build_environment(&asym), Err(EnvError::Validation(_))));
        let split = spec("rooms = [1, 2]");
        assert!(matches!(build_environment(&split), Err(EnvError::Validation(_))));
        let selfloop = spec(
            r#"
            rooms = [1]
            [adjacency]
            1 = [1]
            "#,
        );
        assert!(matches!(build_environment(&selfloop), Err(EnvError::Validation(_))));
    }

    #[test]
    fn legal_actions_examples() {
        let g = RoomGraph::food_court();
        let open = WorldState::all_open(&g);
        assert_eq!(legal_actions(&g, &open, RoomId(1)).unwrap(), vec![Action::Move(RoomId(2))]);
        let chinese = Restaurant::new("Chinese");
        assert_eq!(
            legal_actions(&g, &open, RoomId(3)).unwrap(),
            vec![Action::Move(RoomId(2)), Action::Eat(chinese)]
        );
        let closed = WorldState::with_closed(&g, &["Chinese"]).unwrap();
        assert_eq!(legal_actions(&g, &closed, RoomId(3)).unwrap(), vec![Action::Move(RoomId(2))]);
        assert_eq!(
            legal_actions(&g, &open, RoomId(9)),
            Err(EnvError::UnknownRoom(RoomId(9)))
        );
    }

    #[test]
    fn observe_examples() {
        let g = RoomGraph::food_court();
        let open = WorldState::all_open(&g);
        let obs = observe(&g, &open, RoomId(2)).unwrap();
        assert_eq!(
            obs.visible,
            vec![(Restaurant::new("Chinese"), true), (Restaurant::new("Mexican"), true)]
        );
        assert_eq!(obs.reachable, rooms(&[1, 3, 4]));
        let closed = WorldState::with_closed(&g, &["Chinese"]).unwrap();
        let obs = observe(&g, &closed, RoomId(1)).unwrap();
        assert_eq!(obs.visible, vec![(Restaurant::new("Chinese"), false)]);

        let custom = build_environment(&spec(
            r#"
            rooms = [1, 2]
            [adjacency]
            1 = [2]
            [[restaurants]]
            name = "Thai"
            room = 2
            [visibility]
            Thai = [2]
            "#,
        ))
        .unwrap();
        let w = WorldState::all_open(&custom);
        assert!(observe(&custom, &w, RoomId(1)).unwrap().visible.is_empty());
    }

    #[test]
    fn shortest_path_examples() {
        let g = RoomGraph::food_court();
        let j = Restaurant::new("Japanese");
        assert_eq!(shortest_path(&g, RoomId(1), &j).unwrap(), rooms(&[2, 4, 6, 7]));
        assert!(shortest_path(&g, RoomId(3), &Restaurant::new("Chinese")).unwrap().is_empty());
        assert!(matches!(
            shortest_path(&g, RoomId(1), &Restaurant::new("Thai")),
            Err(EnvError::UnknownRestaurant(_))
        ));
    }

    #[test]
    fn corpus_rows() {
        let g = RoomGraph::food_court();
        let m = |n| Action::Move(RoomId(n));
        let eat = |r: &str| Action::Eat(Restaurant::new(r));

        let t1 = load_trajectory("t1").unwrap();
        assert_eq!(t1.actions, vec![m(2), m(3), m(2)]);
        assert_eq!(t1.world.closed().collect::<Vec<_>>(), vec![&Restaurant::new("Japanese")]);

        let s1 = load_trajectory("study1-closed").unwrap();
        assert_eq!(s1.actions, vec![m(2), m(3), m(2), m(3), eat("Chinese")]);
        assert!(!s1.reconstructed);

        let t3 = load_trajectory("t3").unwrap();
        assert_eq!(t3.actions, vec![m(2), m(3), m(2), m(4), m(5), eat("Mexican")]);
        assert!(t3.reconstructed);

        let t4 = load_trajectory("t4").unwrap();
        assert_eq!(t4.actions, vec![m(2), m(3), eat("Chinese")]);

        let t10 = load_trajectory("t10").unwrap();
        assert_eq!(t10.actions, vec![m(2), m(3), m(2), m(4)]);
        assert!(t10.reconstructed);
        assert!(!load_trajectory("t9").unwrap().reconstructed);
        let closed: Vec<_> = t10.world.closed().map(|r| r.name().to_string()).collect();
        assert_eq!(closed, vec!["Chinese", "Mexican"]);

        assert_eq!(corpus().len(), 12);
        for t in corpus() {
            t.replay(&g).unwrap();
        }
        assert!(matches!(load_trajectory("t11"), Err(EnvError::UnknownTrajectory(_))));
    }

    #[test]
    fn closed_restaurant_is_never_edible() {
        let g = RoomGraph::food_court();
        let worlds = WorldState::enumerate(&g);
        assert_eq!(worlds.len(), 8);
        for w in &worlds {
            for &room in g.rooms() {
                for a in legal_actions(&g, w, room).unwrap() {
                    if let Action::Eat(r) = a {
                        assert!(w.is_open(&r));
                        assert_eq!(g.room_of(&r), Some(room));
                    }
                }
            }
        }
    }
}
