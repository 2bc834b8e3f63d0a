#include "ftpeval/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace ftpeval {
namespace {

Question question_from_record(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  const auto id = j.at("id").get<std::string>();
  const auto stem = j.at("stem").get<std::string>();
  const auto texts = j.at("options").get<std::vector<std::string>>();
  if (texts.size() < 2) throw std::invalid_argument("question '" + id + "' has fewer than 2 options");
  if (texts.size() > 26) throw std::invalid_argument("question '" + id + "' has more than 26 options");
  const auto gold = j.at("gold_index").get<long long>();
  if (gold < 0 || static_cast<std::size_t>(gold) >= texts.size()) {
    throw std::invalid_argument("question '" + id + "': gold_index " + std::to_string(gold) +
                                " out of range for " + std::to_string(texts.size()) + " options");
  }
  std::vector<Option> options;
  options.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    options.push_back(Option{static_cast<char>('A' + i), texts[i]});
  }
  return Question(id, stem, std::move(options), static_cast<char>('A' + gold));
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

std::vector<Question> parse_jsonl(std::istream& in, const std::string& source) {
  std::vector<Question> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DatasetError(where + "malformed JSON: " + e.what(), line_no);
    }
    try {
      auto q = question_from_record(record);
      if (!ids.insert(q.id()).second) {
        throw DatasetError(where + "duplicate question id '" + q.id() + "'", line_no);
      }
      out.push_back(std::move(q));
    } catch (const DatasetError&) {
      throw;
    } catch (const std::exception& e) {
      throw DatasetError(where + e.what(), line_no);
    }
  }
  if (out.empty()) throw DatasetError(source + ": no questions", 0);
  return out;
}

std::vector<Question> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset '" + path + "'", 0);
  return parse_jsonl(in, path);
}

std::string to_jsonl(const std::vector<Question>& questions) {
  std::string out;
  for (const auto& q : questions) {
    std::vector<std::string> texts;
    for (const auto& o : q.options()) texts.push_back(o.text);
    const json record{{"id", q.id()},
                      {"stem", q.stem()},
                      {"options", texts},
                      {"gold_index", q.gold_index()}};
    out += record.dump();
    out += '\n';
  }
  return out;
}

const std::vector<Question>& builtin_toy_dataset() {
  static const std::vector<Question> toy = [] {
    static constexpr const char* kToyJsonl = R"jsonl(
{"id":"toy-01","stem":"What is the capital of Italy?","options":["Rome","Milan","Naples","Turin"],"gold_index":0}
{"id":"toy-02","stem":"How many legs does a spider have?","options":["Six","Eight","Ten","Twelve"],"gold_index":1}
{"id":"toy-03","stem":"Which gas do plants primarily absorb for photosynthesis?","options":["Oxygen","Nitrogen","Carbon dioxide"],"gold_index":2}
{"id":"toy-04","stem":"What is 7 multiplied by 8?","options":["54","56","58","64"],"gold_index":1}
{"id":"toy-05","stem":"Which planet is closest to the Sun?","options":["Mercury","Venus","Mars"],"gold_index":0}
{"id":"toy-06","stem":"What is the boiling point of water at sea level in degrees Celsius?","options":["90","100","110","120"],"gold_index":1}
{"id":"toy-07","stem":"Which organ pumps blood through the human body?","options":["Lungs","Liver","Heart","Kidneys"],"gold_index":2}
{"id":"toy-08","stem":"What is the chemical symbol for gold?","options":["Au","Ag","Gd"],"gold_index":0}
{"id":"toy-09","stem":"Which ocean is the largest?","options":["Atlantic","Indian","Arctic","Pacific"],"gold_index":3}
{"id":"toy-10","stem":"How many days are there in a leap year?","options":["364","365","366"],"gold_index":2}
{"id":"toy-11","stem":"Which shape has exactly three sides?","options":["Triangle","Square","Pentagon","Hexagon"],"gold_index":0}
{"id":"toy-12","stem":"What do bees collect from flowers to make honey?","options":["Pollen","Nectar","Sap","Dew"],"gold_index":1}
{"id":"toy-13","stem":"Which of these animals is a mammal?","options":["Shark","Dolphin","Salmon"],"gold_index":1}
{"id":"toy-14","stem":"What is the freezing point of water in degrees Fahrenheit?","options":["0","32","100","212"],"gold_index":1}
{"id":"toy-15","stem":"Which instrument measures atmospheric pressure?","options":["Barometer","Thermometer","Hygrometer","Anemometer"],"gold_index":0}
{"id":"toy-16","stem":"What is the square root of 81?","options":["7","8","9"],"gold_index":2}
{"id":"toy-17","stem":"Which continent is Egypt located in?","options":["Asia","Africa","Europe","Oceania"],"gold_index":1}
{"id":"toy-18","stem":"What is the main language spoken in Brazil?","options":["Spanish","Portuguese","French","English"],"gold_index":1}
{"id":"toy-19","stem":"Which of these is a prime number?","options":["21","27","29","33"],"gold_index":2}
{"id":"toy-20","stem":"Which force keeps the planets in orbit around the Sun?","options":["Magnetism","Friction","Gravity"],"gold_index":2}
)jsonl";
    std::istringstream in(kToyJsonl);
    return parse_jsonl(in, kToyDatasetName);
  }();
  return toy;
}

}  // namespace ftpeval
