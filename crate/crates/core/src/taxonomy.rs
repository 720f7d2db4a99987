//! Scene taxonomy: five categories, 81 scene types.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SceneCategory {
    #[serde(rename = "Store")]
    Store,
    #[serde(rename = "Home")]
    Home,
    #[serde(rename = "Public spaces")]
    PublicSpaces,
    #[serde(rename = "Leisure")]
    Leisure,
    #[serde(rename = "Working place")]
    WorkingPlace,
}

impl SceneCategory {
    pub const ALL: [SceneCategory; 5] = [
        SceneCategory::Store,
        SceneCategory::Home,
        SceneCategory::PublicSpaces,
        SceneCategory::Leisure,
        SceneCategory::WorkingPlace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneCategory::Store => "Store",
            SceneCategory::Home => "Home",
            SceneCategory::PublicSpaces => "Public spaces",
            SceneCategory::Leisure => "Leisure",
            SceneCategory::WorkingPlace => "Working place",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn scene_types(self) -> &'static [&'static str] {
        match self {
            SceneCategory::Store => STORE,
            SceneCategory::Home => HOME,
            SceneCategory::PublicSpaces => PUBLIC_SPACES,
            SceneCategory::Leisure => LEISURE,
            SceneCategory::WorkingPlace => WORKING_PLACE,
        }
    }
}

impl fmt::Display for SceneCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const STORE: &[&str] = &[
    "bakery",
    "grocery store",
    "clothing store",
    "deli",
    "laundromat",
    "jewellery shop",
    "bookstore",
    "video store",
    "florist shop",
    "shoe shop",
    "toy store",
    "furniture store",
    "electronics store",
    "craft store",
    "music store",
    "sporting goods store",
];

const HOME: &[&str] = &[
    "bedroom",
    "nursery",
    "closet",
    "pantry",
    "children room",
    "lobby",
    "dining room",
    "corridor",
    "living room",
    "bathroom",
    "kitchen",
    "wine cellar",
    "garage",
    "sunroom",
    "cabinet",
    "study room",
    "apartment",
    "home office",
    "basement",
    "attic",
    "laundry room",
];

const PUBLIC_SPACES: &[&str] = &[
    "prison cell",
    "library",
    "waiting room",
    "museum",
    "locker room",
    "town hall",
    "community center",
    "convention center",
    "recreation center",
];

const LEISURE: &[&str] = &[
    "buffet",
    "fast-food restaurant",
    "restaurant",
    "bar",
    "game room",
    "casino",
    "gym",
    "hair salon",
    "arcade",
    "spa",
    "concert hall",
    "ski lodge",
    "lounge",
    "club",
];

const WORKING_PLACE: &[&str] = &[
    "hospital room",
    "kindergarten",
    "restaurant kitchen",
    "art studio",
    "classroom",
    "laboratory",
    "music studio",
    "operating room",
    "office",
    "computer room",
    "warehouse",
    "greenhouse",
    "dental office",
    "TV studio",
    "meeting room",
    "school room",
    "conference room",
    "factory floor",
    "call center",
    "reception area",
    "nursing station",
];

/// Every scene type paired with its category, in category order.
pub fn all_scene_types() -> impl Iterator<Item = (SceneCategory, &'static str)> {
    SceneCategory::ALL
        .into_iter()
        .flat_map(|c| c.scene_types().iter().map(move |t| (c, *t)))
}

pub fn scene_type_count() -> usize {
    all_scene_types().count()
}

/// Category owning `scene_type`, if it is in the taxonomy.
pub fn category_of(scene_type: &str) -> Option<SceneCategory> {
    all_scene_types()
        .find(|(_, t)| *t == scene_type)
        .map(|(c, _)| c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn taxonomy_sizes() {
        let sizes: Vec<usize> = SceneCategory::ALL
            .iter()
            .map(|c| c.scene_types().len())
            .collect();
        assert_eq!(sizes, vec![16, 21, 9, 14, 21]);
        let distinct: HashSet<&str> = all_scene_types().map(|(_, t)| t).collect();
        assert_eq!(distinct.len(), 81);
        assert_eq!(scene_type_count(), 81);
    }

    #[test]
    fn lookup() {
        assert_eq!(category_of("bakery"), Some(SceneCategory::Store));
        assert_eq!(category_of("TV studio"), Some(SceneCategory::WorkingPlace));
        assert_eq!(category_of("spaceship"), None);
        assert_eq!(
            SceneCategory::from_name("Public spaces"),
            Some(SceneCategory::PublicSpaces)
        );
    }
}
