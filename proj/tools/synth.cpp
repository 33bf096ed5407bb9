// Writes a generated data set (corpus, embeddings, dictionary, linker
// fixtures, KB snapshot) and a matching pipeline config.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "moralkb/errors.hpp"
#include "moralkb/io.hpp"
#include "moralkb/synthetic.hpp"

int main(int argc, char** argv) {
  using namespace moralkb;
  CLI::App app{"Generate a synthetic moral-foundation data set"};
  std::string out_dir;
  SyntheticOptions opts;
  std::vector<std::string> foundations{"fairness_cheating"};
  app.add_option("-o,--out", out_dir, "Output directory")->required();
  app.add_option("--tweets", opts.tweets, "Number of tweets")->capture_default_str();
  app.add_option("--seed", opts.seed, "Generator seed")->capture_default_str();
  app.add_option("--positive-rate", opts.positive_rate, "Fraction of moral tweets")->capture_default_str();
  app.add_option("--entities", opts.entities_per_foundation, "Signal entities per foundation")
      ->capture_default_str();
  app.add_option("--foundations", foundations, "Foundations with positive tweets, or 'all'")
      ->delimiter(',');
  app.add_flag("--kkk", opts.include_kkk, "Add the KKK -> Ku Klux Klan entity");
  CLI11_PARSE(app, argc, argv);

  try {
    opts.foundations.clear();
    for (const auto& name : foundations) {
      if (name == "all") {
        opts.foundations.assign(kFoundations.begin(), kFoundations.end());
        break;
      }
      auto c = parse_class(name);
      if (!c || *c == MoralClass::NonMoral) throw UsageError("not a foundation: " + name);
      opts.foundations.push_back(static_cast<Foundation>(index_of(*c)));
    }
    auto ds = make_synthetic(opts);
    // The corpus file carries coder labels only; ingest derives gold.
    for (auto& t : ds.corpus.tweets) t.gold.reset();

    const std::filesystem::path dir(out_dir);
    write_file_atomic(dir / "corpus.jsonl", serialize_corpus(ds.corpus));
    write_file_atomic(dir / "embeddings.txt", serialize_embeddings(ds.embeddings));
    write_file_atomic(dir / "mfd.tsv", serialize_mfd(ds.mfd));
    write_file_atomic(dir / "fixtures.jsonl", serialize_fixtures(ds.fixtures));
    write_file_atomic(dir / "snapshot.jsonl", serialize_snapshot(ds.entities));
    write_file_atomic(dir / "moralkb.conf",
                      "# Generated by moralkb-synth\n"
                      "paths.corpus = corpus.jsonl\n"
                      "paths.embeddings = embeddings.txt\n"
                      "paths.mfd = mfd.tsv\n"
                      "paths.output_dir = out\n"
                      "linker.mode = fixture\n"
                      "linker.fixtures = fixtures.jsonl\n"
                      "kb.mode = snapshot\n"
                      "kb.snapshot = snapshot.jsonl\n"
                      "# A small model keeps the demo quick on one core.\n"
                      "train.hidden_dim = 16\n"
                      "train.head_dim = 8\n"
                      "train.epochs = 10\n"
                      "eval.folds = 5\n");
    std::cout << "wrote " << ds.corpus.tweets.size() << " tweets, " << ds.entities.size()
              << " entities to " << dir.string() << "\n";
  } catch (const UsageError& e) {
    std::cerr << "moralkb-synth: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "moralkb-synth: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
