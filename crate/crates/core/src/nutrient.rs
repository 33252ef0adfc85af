//! Nutrient panel, meal types and the WWEIA-style food taxonomy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const NUTRIENT_COUNT: usize = 21;

/// Per-food or per-meal nutrient amounts in panel order.
pub type NutrientArray<T> = [T; NUTRIENT_COUNT];

/// The nutrient panel. The first twelve entries follow the optimization
/// profile order; the remaining micronutrients feed the adequacy metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nutrient {
    Energy,
    Protein,
    Carbohydrate,
    TotalFat,
    Fiber,
    Sodium,
    SaturatedFat,
    AddedSugars,
    Potassium,
    Calcium,
    Iron,
    VitaminD,
    Zinc,
    VitaminA,
    VitaminC,
    VitaminB6,
    VitaminB12,
    Thiamin,
    Riboflavin,
    Niacin,
    Folate,
}

impl Nutrient {
    pub const ALL: [Nutrient; NUTRIENT_COUNT] = [
        Nutrient::Energy,
        Nutrient::Protein,
        Nutrient::Carbohydrate,
        Nutrient::TotalFat,
        Nutrient::Fiber,
        Nutrient::Sodium,
        Nutrient::SaturatedFat,
        Nutrient::AddedSugars,
        Nutrient::Potassium,
        Nutrient::Calcium,
        Nutrient::Iron,
        Nutrient::VitaminD,
        Nutrient::Zinc,
        Nutrient::VitaminA,
        Nutrient::VitaminC,
        Nutrient::VitaminB6,
        Nutrient::VitaminB12,
        Nutrient::Thiamin,
        Nutrient::Riboflavin,
        Nutrient::Niacin,
        Nutrient::Folate,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn key(self) -> &'static str {
        match self {
            Nutrient::Energy => "energy",
            Nutrient::Protein => "protein",
            Nutrient::Carbohydrate => "carbohydrate",
            Nutrient::TotalFat => "total_fat",
            Nutrient::Fiber => "fiber",
            Nutrient::Sodium => "sodium",
            Nutrient::SaturatedFat => "saturated_fat",
            Nutrient::AddedSugars => "added_sugars",
            Nutrient::Potassium => "potassium",
            Nutrient::Calcium => "calcium",
            Nutrient::Iron => "iron",
            Nutrient::VitaminD => "vitamin_d",
            Nutrient::Zinc => "zinc",
            Nutrient::VitaminA => "vitamin_a",
            Nutrient::VitaminC => "vitamin_c",
            Nutrient::VitaminB6 => "vitamin_b6",
            Nutrient::VitaminB12 => "vitamin_b12",
            Nutrient::Thiamin => "thiamin",
            Nutrient::Riboflavin => "riboflavin",
            Nutrient::Niacin => "niacin",
            Nutrient::Folate => "folate",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Nutrient::Energy => "kcal",
            Nutrient::Protein
            | Nutrient::Carbohydrate
            | Nutrient::TotalFat
            | Nutrient::Fiber
            | Nutrient::SaturatedFat
            | Nutrient::AddedSugars => "g",
            Nutrient::VitaminD | Nutrient::VitaminA | Nutrient::VitaminB12 | Nutrient::Folate => "ug",
            _ => "mg",
        }
    }

    /// Column name used in `foods.csv`, e.g. `protein_g_100g`.
    pub fn column(self) -> String {
        format!("{}_{}_100g", self.key(), self.unit())
    }
}

impl fmt::Display for Nutrient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Nutrient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Nutrient::ALL
            .iter()
            .copied()
            .find(|n| n.key() == s)
            .ok_or_else(|| Error::validation(format!("unknown nutrient `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MealType {
    Breakfast,
    Lunch,
    Dinner,
}

impl MealType {
    pub const ALL: [MealType; 3] = [MealType::Breakfast, MealType::Lunch, MealType::Dinner];

    pub fn as_str(self) -> &'static str {
        match self {
            MealType::Breakfast => "breakfast",
            MealType::Lunch => "lunch",
            MealType::Dinner => "dinner",
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MealType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MealType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "breakfast" | "b" => Ok(MealType::Breakfast),
            "lunch" | "l" => Ok(MealType::Lunch),
            "dinner" | "d" => Ok(MealType::Dinner),
            other => Err(Error::validation(format!("unknown meal type `{other}`"))),
        }
    }
}

/// Top-level WWEIA food groups. Every food belongs to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MainCategory {
    MilkDairy,
    ProteinFoods,
    MixedDishes,
    Grains,
    SnacksSweets,
    Fruits,
    Vegetables,
    Beverages,
    AlcoholicBeverages,
    Water,
    FatsOils,
    CondimentsSauces,
    Sugars,
    BabyFoods,
    Other,
}

impl MainCategory {
    pub const ALL: [MainCategory; 15] = [
        MainCategory::MilkDairy,
        MainCategory::ProteinFoods,
        MainCategory::MixedDishes,
        MainCategory::Grains,
        MainCategory::SnacksSweets,
        MainCategory::Fruits,
        MainCategory::Vegetables,
        MainCategory::Beverages,
        MainCategory::AlcoholicBeverages,
        MainCategory::Water,
        MainCategory::FatsOils,
        MainCategory::CondimentsSauces,
        MainCategory::Sugars,
        MainCategory::BabyFoods,
        MainCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MainCategory::MilkDairy => "milk_dairy",
            MainCategory::ProteinFoods => "protein_foods",
            MainCategory::MixedDishes => "mixed_dishes",
            MainCategory::Grains => "grains",
            MainCategory::SnacksSweets => "snacks_sweets",
            MainCategory::Fruits => "fruits",
            MainCategory::Vegetables => "vegetables",
            MainCategory::Beverages => "beverages",
            MainCategory::AlcoholicBeverages => "alcoholic_beverages",
            MainCategory::Water => "water",
            MainCategory::FatsOils => "fats_oils",
            MainCategory::CondimentsSauces => "condiments_sauces",
            MainCategory::Sugars => "sugars",
            MainCategory::BabyFoods => "baby_foods",
            MainCategory::Other => "other",
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MainCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MainCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['/', ' ', '-'], "_");
        MainCategory::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| Error::validation(format!("unknown main category `{s}`")))
    }
}
