//! CSV readers and writers for `foods.csv`, `meals.csv`, `codemap.csv` and `labels.csv`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::harmonize::{CodeMap, CodeMapEntry, MapReason};
use super::{FoodRecord, Meal, MealItem};
use crate::error::{Error, Result};
use crate::nutrient::{Nutrient, NUTRIENT_COUNT};

const FOOD_FIXED: [&str; 6] = ["food_code", "name", "main_category", "sub_category", "is_beverage", "is_solid"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn parse_bool(s: &str, ctx: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Ok(true),
        "0" | "false" | "no" | "n" | "" => Ok(false),
        other => Err(Error::validation(format!("{ctx}: expected boolean, got `{other}`"))),
    }
}

fn parse_f64(s: &str, ctx: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::validation(format!("{ctx}: expected number, got `{s}`")))
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn require_column(headers: &csv::StringRecord, name: &str, file: &str) -> Result<usize> {
    column_index(headers, name).ok_or_else(|| Error::validation(format!("{file}: missing column `{name}`")))
}

/// Reads `foods.csv`. Nutrient columns absent from the header are read as zero,
/// except energy which is required.
pub fn read_foods(path: impl AsRef<Path>) -> Result<Vec<FoodRecord>> {
    read_foods_from(open(path.as_ref())?)
}

pub fn read_foods_from<R: Read>(reader: R) -> Result<Vec<FoodRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let fixed: Vec<usize> = FOOD_FIXED
        .iter()
        .map(|c| require_column(&headers, c, "foods.csv"))
        .collect::<Result<_>>()?;
    require_column(&headers, &Nutrient::Energy.column(), "foods.csv")?;
    let nutrient_cols: Vec<Option<usize>> =
        Nutrient::ALL.iter().map(|n| column_index(&headers, &n.column())).collect();

    let mut foods = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ctx = format!("foods.csv row {}", row + 1);
        let mut nutrients = [0.0; NUTRIENT_COUNT];
        for (slot, col) in nutrients.iter_mut().zip(&nutrient_cols) {
            if let Some(c) = col {
                *slot = parse_f64(&rec[*c], &ctx)?;
            }
        }
        let food = FoodRecord {
            food_code: rec[fixed[0]].trim().to_string(),
            name: rec[fixed[1]].to_string(),
            main_category: rec[fixed[2]].parse()?,
            sub_category: rec[fixed[3]].trim().to_string(),
            nutrients_per_100g: nutrients,
            is_beverage: parse_bool(&rec[fixed[4]], &ctx)?,
            is_solid: parse_bool(&rec[fixed[5]], &ctx)?,
        };
        food.validate()?;
        foods.push(food);
    }
    Ok(foods)
}

pub fn write_foods<W: Write>(writer: W, foods: &[FoodRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FOOD_FIXED.iter().map(|s| s.to_string()).collect();
    header.extend(Nutrient::ALL.iter().map(|n| n.column()));
    wtr.write_record(&header)?;
    for f in foods {
        let mut row = vec![
            f.food_code.clone(),
            f.name.clone(),
            f.main_category.to_string(),
            f.sub_category.clone(),
            f.is_beverage.to_string(),
            f.is_solid.to_string(),
        ];
        row.extend(f.nutrients_per_100g.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<foods writer>", e))?;
    Ok(())
}

/// Reads long-format `meals.csv` (`meal_id,meal_type,food_code,grams`).
/// Meals keep first-appearance order; repeated foods within a meal are summed.
pub fn read_meals(path: impl AsRef<Path>) -> Result<Vec<Meal>> {
    read_meals_from(open(path.as_ref())?)
}

pub fn read_meals_from<R: Read>(reader: R) -> Result<Vec<Meal>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols: Vec<usize> = ["meal_id", "meal_type", "food_code", "grams"]
        .iter()
        .map(|c| require_column(&headers, c, "meals.csv"))
        .collect::<Result<_>>()?;
    let mut meals: Vec<Meal> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ctx = format!("meals.csv row {}", row + 1);
        let meal_id = rec[cols[0]].trim().to_string();
        let meal_type = rec[cols[1]].parse()?;
        let item = MealItem::new(rec[cols[2]].trim(), parse_f64(&rec[cols[3]], &ctx)?);
        let slot = *index.entry(meal_id.clone()).or_insert_with(|| {
            meals.push(Meal::new(meal_id.clone(), meal_type, Vec::new()));
            meals.len() - 1
        });
        if meals[slot].meal_type != meal_type {
            return Err(Error::validation(format!("{ctx}: meal `{meal_id}` has conflicting meal types")));
        }
        meals[slot].items.push(item);
    }
    for m in &mut meals {
        m.merge_duplicates();
        m.validate()?;
    }
    Ok(meals)
}

pub fn write_meals<W: Write>(writer: W, meals: &[Meal]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["meal_id", "meal_type", "food_code", "grams"])?;
    for m in meals {
        for item in &m.items {
            wtr.write_record([
                m.meal_id.as_str(),
                m.meal_type.as_str(),
                item.food_code.as_str(),
                &item.grams.to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<meals writer>", e))?;
    Ok(())
}

/// Reads `codemap.csv` (`old_code,new_code,reason`). An empty `new_code` means no target.
pub fn read_codemap(path: impl AsRef<Path>) -> Result<CodeMap> {
    read_codemap_from(open(path.as_ref())?)
}

pub fn read_codemap_from<R: Read>(reader: R) -> Result<CodeMap> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols: Vec<usize> = ["old_code", "new_code", "reason"]
        .iter()
        .map(|c| require_column(&headers, c, "codemap.csv"))
        .collect::<Result<_>>()?;
    let mut map = CodeMap::default();
    for rec in rdr.records() {
        let rec = rec?;
        let new_code = rec[cols[1]].trim();
        map.insert(
            rec[cols[0]].trim(),
            CodeMapEntry {
                new_code: (!new_code.is_empty()).then(|| new_code.to_string()),
                reason: rec[cols[2]].parse::<MapReason>()?,
            },
        );
    }
    Ok(map)
}

/// Reads `labels.csv` (`meal_id,cluster_id`). Negative ids mark noise.
pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, i64>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    let id = require_column(&headers, "meal_id", "labels.csv")?;
    let cl = require_column(&headers, "cluster_id", "labels.csv")?;
    let mut out = BTreeMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let label = rec[cl]
            .trim()
            .parse::<i64>()
            .map_err(|_| Error::validation(format!("labels.csv row {}: bad cluster id", row + 1)))?;
        out.insert(rec[id].trim().to_string(), label);
    }
    Ok(out)
}
