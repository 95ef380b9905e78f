#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "metabandit/policies.hpp"
#include "metabandit/rng.hpp"

namespace metabandit {

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct MissingGenre : std::runtime_error {
  explicit MissingGenre(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyGroup : std::runtime_error {
  explicit EmptyGroup(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr int kGenreCount = 18;
extern const std::array<std::string_view, kGenreCount> kGenreVocabulary;

/// Offline recommendation environment over the "::"-separated ratings
/// tables (movies.dat, ratings.dat, users.dat). Each user is a task; a
/// round presents arms_per_round of the user's own rated movies and pays
/// that user's stored rating, mapped from {1..5} to [0, 1]. Contexts are
/// normalized genre indicators.
class MovieLensEnv {
 public:
  /// group selects users: "all", "M"/"F" by gender, or an occupation id
  /// ("0".."20"). Users need at least 2 * arms_per_round distinct rated
  /// movies to be eligible. Throws ParseError / MissingGenre on malformed
  /// data and EmptyGroup when no user qualifies.
  static MovieLensEnv load(const std::string& dir, const std::string& group,
                           int arms_per_round);

  int dim() const { return kGenreCount; }
  int num_users() const { return static_cast<int>(users_.size()); }
  int arms_per_round() const { return arms_per_round_; }
  int user_id(int user_index) const { return users_.at(user_index).id; }
  int user_rating_count(int user_index) const {
    return static_cast<int>(users_.at(user_index).rated.size());
  }

  const Eigen::VectorXd& movie_context(int movie_index) const {
    return contexts_.at(movie_index);
  }

  /// Samples arms_per_round of the user's rated movies without replacement.
  /// ArmSet ids are internal movie indices.
  ArmSet user_round_arms(int user_index, Rng& rng) const;

  /// Stored normalized rating of an arm from user_round_arms.
  double round_reward(int user_index, const ArmSet& arms, int chosen) const;

  /// Best stored rating in the set minus the chosen one.
  double round_regret(int user_index, const ArmSet& arms, int chosen) const;

 private:
  struct UserTask {
    int id = 0;
    std::vector<int> rated;          // internal movie indices
    std::vector<double> ratings;     // aligned with `rated`
    std::unordered_map<int, double> rating_by_movie;
  };

  int arms_per_round_ = 0;
  std::vector<Eigen::VectorXd> contexts_;  // by internal movie index
  std::vector<UserTask> users_;
};

}  // namespace metabandit
