#include "metabandit/movielens.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace metabandit {

const std::array<std::string_view, kGenreCount> kGenreVocabulary = {
    "Action",      "Adventure", "Animation", "Children's", "Comedy",
    "Crime",       "Documentary", "Drama",   "Fantasy",    "Film-Noir",
    "Horror",      "Musical",   "Mystery",   "Romance",    "Sci-Fi",
    "Thriller",    "War",       "Western"};

namespace {

std::vector<std::string> split_double_colon(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find("::", start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 2;
  }
  return fields;
}

int parse_int(const std::string& text, const std::string& file, size_t lineno) {
  try {
    size_t used = 0;
    const int value = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ParseError(file + ":" + std::to_string(lineno) +
                     ": expected an integer, got '" + text + "'");
  }
}

int genre_index(const std::string& token, const std::string& file,
                size_t lineno) {
  for (int g = 0; g < kGenreCount; ++g) {
    if (kGenreVocabulary[g] == token) return g;
  }
  throw MissingGenre(file + ":" + std::to_string(lineno) +
                     ": unknown genre '" + token + "'");
}

// Strips a trailing carriage return; the tables ship with DOS line ends in
// some distributions.
void chomp(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

struct RawUser {
  char gender = '?';
  int occupation = -1;
};

}  // namespace

MovieLensEnv MovieLensEnv::load(const std::string& dir,
                                const std::string& group,
                                int arms_per_round) {
  if (arms_per_round < 1) {
    throw std::invalid_argument("MovieLensEnv: arms_per_round < 1");
  }
  MovieLensEnv env;
  env.arms_per_round_ = arms_per_round;

  // movies.dat: MovieID::Title::Genre|Genre|...
  const std::string movies_path = dir + "/movies.dat";
  std::ifstream movies(movies_path);
  if (!movies) throw ParseError("cannot open " + movies_path);
  std::unordered_map<int, int> movie_index;  // file id -> internal index
  std::string line;
  size_t lineno = 0;
  while (std::getline(movies, line)) {
    ++lineno;
    chomp(line);
    if (line.empty()) continue;
    const auto fields = split_double_colon(line);
    if (fields.size() != 3) {
      throw ParseError(movies_path + ":" + std::to_string(lineno) +
                       ": expected 3 fields");
    }
    const int id = parse_int(fields[0], movies_path, lineno);
    Eigen::VectorXd context = Eigen::VectorXd::Zero(kGenreCount);
    size_t start = 0;
    const std::string& genres = fields[2];
    if (genres.empty()) {
      throw ParseError(movies_path + ":" + std::to_string(lineno) +
                       ": movie has no genres");
    }
    while (start <= genres.size()) {
      const size_t bar = genres.find('|', start);
      const std::string token =
          bar == std::string::npos ? genres.substr(start)
                                   : genres.substr(start, bar - start);
      context[genre_index(token, movies_path, lineno)] += 1.0;
      if (bar == std::string::npos) break;
      start = bar + 1;
    }
    context /= context.norm();
    movie_index.emplace(id, static_cast<int>(env.contexts_.size()));
    env.contexts_.push_back(std::move(context));
  }

  // users.dat: UserID::Gender::Age::Occupation::Zip
  const std::string users_path = dir + "/users.dat";
  std::ifstream users(users_path);
  if (!users) throw ParseError("cannot open " + users_path);
  std::unordered_map<int, RawUser> user_info;
  lineno = 0;
  while (std::getline(users, line)) {
    ++lineno;
    chomp(line);
    if (line.empty()) continue;
    const auto fields = split_double_colon(line);
    if (fields.size() != 5 || fields[1].size() != 1) {
      throw ParseError(users_path + ":" + std::to_string(lineno) +
                       ": expected UserID::Gender::Age::Occupation::Zip");
    }
    RawUser info;
    info.gender = fields[1][0];
    info.occupation = parse_int(fields[3], users_path, lineno);
    user_info.emplace(parse_int(fields[0], users_path, lineno), info);
  }

  // ratings.dat: UserID::MovieID::Rating::Timestamp
  const std::string ratings_path = dir + "/ratings.dat";
  std::ifstream ratings(ratings_path);
  if (!ratings) throw ParseError("cannot open " + ratings_path);
  std::unordered_map<int, std::unordered_map<int, double>> by_user;
  lineno = 0;
  while (std::getline(ratings, line)) {
    ++lineno;
    chomp(line);
    if (line.empty()) continue;
    const auto fields = split_double_colon(line);
    if (fields.size() != 4) {
      throw ParseError(ratings_path + ":" + std::to_string(lineno) +
                       ": expected 4 fields");
    }
    const int user = parse_int(fields[0], ratings_path, lineno);
    const int movie = parse_int(fields[1], ratings_path, lineno);
    const int stars = parse_int(fields[2], ratings_path, lineno);
    if (stars < 1 || stars > 5) {
      throw ParseError(ratings_path + ":" + std::to_string(lineno) +
                       ": rating out of range");
    }
    const auto movie_it = movie_index.find(movie);
    if (movie_it == movie_index.end()) {
      throw ParseError(ratings_path + ":" + std::to_string(lineno) +
                       ": rating references unknown movie " +
                       std::to_string(movie));
    }
    by_user[user][movie_it->second] = (stars - 1.0) / 4.0;
  }

  // Group filter plus the eligibility floor: a user must be able to fill
  // rounds from their own history with headroom (two sets' worth).
  const bool want_all = group == "all" || group.empty();
  char want_gender = 0;
  int want_occupation = -1;
  if (!want_all) {
    if (group == "M" || group == "m") {
      want_gender = 'M';
    } else if (group == "F" || group == "f") {
      want_gender = 'F';
    } else {
      try {
        want_occupation = std::stoi(group);
      } catch (const std::exception&) {
        throw EmptyGroup("unrecognized group selector '" + group + "'");
      }
    }
  }

  std::vector<int> sorted_users;
  sorted_users.reserve(by_user.size());
  for (const auto& [user, _] : by_user) sorted_users.push_back(user);
  std::sort(sorted_users.begin(), sorted_users.end());

  for (const int user : sorted_users) {
    const auto info_it = user_info.find(user);
    if (info_it == user_info.end()) continue;
    if (!want_all) {
      if (want_gender != 0 && info_it->second.gender != want_gender) continue;
      if (want_occupation >= 0 && info_it->second.occupation != want_occupation)
        continue;
    }
    const auto& rated = by_user[user];
    if (static_cast<int>(rated.size()) < 2 * arms_per_round) continue;

    UserTask task;
    task.id = user;
    task.rated.reserve(rated.size());
    for (const auto& [movie, rating] : rated) task.rated.push_back(movie);
    std::sort(task.rated.begin(), task.rated.end());
    task.ratings.reserve(task.rated.size());
    for (const int movie : task.rated) {
      task.ratings.push_back(rated.at(movie));
    }
    task.rating_by_movie = rated;
    env.users_.push_back(std::move(task));
  }

  if (env.users_.empty()) {
    throw EmptyGroup("no eligible users for group '" + group + "'");
  }
  return env;
}

ArmSet MovieLensEnv::user_round_arms(int user_index, Rng& rng) const {
  const UserTask& user = users_.at(user_index);
  const int pool = static_cast<int>(user.rated.size());
  const int k = arms_per_round_;
  if (pool < k) {
    throw EmptyGroup("user " + std::to_string(user.id) +
                     " has fewer rated movies than arms per round");
  }
  // Partial Fisher-Yates over a scratch copy.
  std::vector<int> scratch = user.rated;
  ArmSet arms;
  arms.contexts.resize(k, kGenreCount);
  arms.ids.resize(k);
  for (int j = 0; j < k; ++j) {
    const int pick = j + rng.uniform_int(pool - j);
    std::swap(scratch[j], scratch[pick]);
    arms.ids[j] = scratch[j];
    arms.contexts.row(j) = contexts_.at(scratch[j]);
  }
  return arms;
}

double MovieLensEnv::round_reward(int user_index, const ArmSet& arms,
                                  int chosen) const {
  const UserTask& user = users_.at(user_index);
  return user.rating_by_movie.at(arms.ids.at(chosen));
}

double MovieLensEnv::round_regret(int user_index, const ArmSet& arms,
                                  int chosen) const {
  const UserTask& user = users_.at(user_index);
  double best = 0.0;
  for (const int movie : arms.ids) {
    best = std::max(best, user.rating_by_movie.at(movie));
  }
  return best - user.rating_by_movie.at(arms.ids.at(chosen));
}

}  // namespace metabandit
