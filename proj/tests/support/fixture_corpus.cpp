#include "fixture_corpus.hpp"

#include "gechat/cot.hpp"
#include "gechat/text.hpp"

namespace fixture {

using gechat::Chunk;
using gechat::ScriptedChat;

const std::vector<Doc>& corpus() {
    static const std::vector<Doc> docs = {
        {"lighthouse.txt",
         "The lighthouse keeper Marta Oyelaran lived on Gannet Rock for eleven winters. "
         "Every evening she climbed the spiral stair and lit the Fresnel lens. "
         "The Fresnel lens was made in Paris by the firm of Henry-Lepaute. "
         "Her brother Tomás rowed supplies out from the harbour at Port Elwyn once a month. "
         "In the storm of 1887 the supply boat was lost and Tomás swam the last mile to Gannet Rock. "
         "Marta Oyelaran kept a logbook in which she recorded every ship that passed.\n\n"
         "The logbook is now kept in the museum at Port Elwyn. "
         "Visitors to the museum can read the entry for the night of the storm. "
         "It says that the Fresnel lens never went dark. "
         "The light on Gannet Rock was automated in 1962.",
         {"Marta Oyelaran", "Gannet Rock", "Fresnel lens", "Paris", "Henry-Lepaute", "Tomás", "Port Elwyn",
          "logbook", "museum"},
         {{"Who rowed supplies to Gannet Rock?",
           "Tomás rowed supplies out from the harbour at Port Elwyn once a month.",
           {"Tomás is the brother of Marta Oyelaran.", "Tomás rowed supplies from Port Elwyn to Gannet Rock."}},
          {"Where was the Fresnel lens made?",
           "The Fresnel lens was made in Paris by the firm of Henry-Lepaute.",
           {"Marta Oyelaran lit the Fresnel lens every evening.", "The Fresnel lens came from Henry-Lepaute in Paris."}},
          {"Where is the logbook kept today?",
           "The logbook is now kept in the museum at Port Elwyn.",
           {"Marta Oyelaran kept a logbook of passing ships.", "The logbook moved to the museum at Port Elwyn."}},
          {"What happened during the storm of 1887?",
           "The supply boat was lost and Tomás swam the last mile to Gannet Rock. The Fresnel lens never went dark.",
           {"Tomás lost the supply boat in the storm.", "The logbook says the Fresnel lens never went dark."}},
          {"When was the light automated?",
           "The light on Gannet Rock was automated in 1962.",
           {"Gannet Rock had a keeper for many years.", "Gannet Rock was automated in 1962."}}}},

        {"enzymes.txt",
         "Catalase is an enzyme found in nearly all living organisms exposed to oxygen. "
         "Catalase breaks down hydrogen peroxide into water and oxygen. "
         "Hydrogen peroxide is a harmful by-product of many metabolic reactions. "
         "Each catalase molecule contains four heme groups with an iron atom at the centre. "
         "The iron atom lets catalase react with hydrogen peroxide very quickly. "
         "Catalase has one of the highest turnover numbers of all enzymes. "
         "In the liver, catalase is concentrated in small organelles called peroxisomes. "
         "Peroxisomes also oxidise long-chain fatty acids. "
         "A deficiency of catalase causes a rare disorder called acatalasia. "
         "Patients with acatalasia often develop ulcers of the gums.",
         {"Catalase", "hydrogen peroxide", "oxygen", "heme groups", "iron atom", "peroxisomes", "liver",
          "acatalasia", "fatty acids"},
         {{"What does catalase break down?",
           "Catalase breaks down hydrogen peroxide into water and oxygen.",
           {"Catalase is an enzyme.", "Catalase breaks down hydrogen peroxide."}},
          {"Why is catalase so fast?",
           "The iron atom lets catalase react with hydrogen peroxide very quickly.",
           {"Catalase contains four heme groups.", "Each of the heme groups holds an iron atom."}},
          {"Where is catalase concentrated in the liver?",
           "In the liver, catalase is concentrated in small organelles called peroxisomes.",
           {"The liver contains catalase.", "Catalase is concentrated in peroxisomes."}},
          {"What disorder results from a lack of catalase?",
           "A deficiency of catalase causes a rare disorder called acatalasia. Patients with acatalasia often develop ulcers of the gums.",
           {"A deficiency of catalase causes acatalasia.", "Patients with acatalasia develop ulcers."}}}},

        {"ledger.txt",
         "The Hanseatic League was a network of merchant guilds and market towns in northern Europe. "
         "Lübeck served as the leading city of the Hanseatic League for most of its history. "
         "The League maintained a trading post in London called the Steelyard. "
         "Merchants at the Steelyard exported English wool and imported Baltic timber. "
         "Another important trading post, the Kontor at Bergen, handled the trade in dried cod. "
         "The Hanseatic League began to decline in the sixteenth century. "
         "The rise of Dutch shipping took much of the Baltic trade away from Lübeck. "
         "The last general assembly of the Hanseatic League met in 1669. "
         "Only Lübeck, Hamburg and Bremen attended that final assembly.",
         {"Hanseatic League", "Lübeck", "London", "Steelyard", "Bergen", "Kontor", "Hamburg", "Bremen",
          "Dutch shipping"},
         {{"Which city led the Hanseatic League?",
           "Lübeck served as the leading city of the Hanseatic League for most of its history.",
           {"The Hanseatic League was a network of market towns.", "Lübeck led the Hanseatic League."}},
          {"What was traded at the Steelyard?",
           "Merchants at the Steelyard exported English wool and imported Baltic timber.",
           {"The Steelyard was a trading post in London.", "The Steelyard exported wool and imported timber."}},
          {"Why did the Hanseatic League decline?",
           "The rise of Dutch shipping took much of the Baltic trade away from Lübeck.",
           {"The Hanseatic League declined in the sixteenth century.", "Dutch shipping took trade from Lübeck."}},
          {"Who attended the last assembly?",
           "Only Lübeck, Hamburg and Bremen attended that final assembly.",
           {"The last assembly of the Hanseatic League met in 1669.", "Lübeck, Hamburg and Bremen attended."}},
          {"What did the Kontor at Bergen handle?",
           "Another important trading post, the Kontor at Bergen, handled the trade in dried cod.",
           {"The Kontor was a trading post.", "The Kontor at Bergen handled dried cod."}}}},

        {"compiler.txt",
         "A compiler translates source code into machine code in several phases. "
         "The lexer groups characters into tokens such as identifiers and numbers. "
         "The parser arranges the tokens into an abstract syntax tree. "
         "Semantic analysis checks the abstract syntax tree for type errors. "
         "The optimizer rewrites the intermediate representation to run faster. "
         "A common optimisation is constant folding, which evaluates expressions like 2 + 3 at compile time. "
         "Register allocation assigns variables to a limited number of CPU registers. "
         "When registers run out, the code generator spills values to the stack. "
         "Finally the linker joins object files into one executable.",
         {"compiler", "lexer", "tokens", "parser", "abstract syntax tree", "optimizer", "constant folding",
          "Register allocation", "CPU registers", "linker", "stack"},
         {{"What does the parser produce?",
           "The parser arranges the tokens into an abstract syntax tree.",
           {"The lexer produces tokens.", "The parser turns tokens into an abstract syntax tree."}},
          {"What is constant folding?",
           "A common optimisation is constant folding, which evaluates expressions like 2 + 3 at compile time.",
           {"The optimizer rewrites code to run faster.", "Constant folding evaluates expressions at compile time."}},
          {"What happens when registers run out?",
           "When registers run out, the code generator spills values to the stack.",
           {"Register allocation assigns variables to CPU registers.", "The code generator spills values to the stack."}},
          {"What joins object files?",
           "Finally the linker joins object files into one executable.",
           {"The compiler produces object files.", "The linker joins object files into an executable."}}}},

        {"glacier.txt",
         "The Aletsch Glacier is the largest glacier in the Alps. "
         "It flows for about twenty kilometres from the Jungfrau region towards the Rhône valley. "
         "Concordia Place is the point where three tributary glaciers meet. "
         "At Concordia Place the ice is almost one kilometre thick. "
         "Since 1870 the Aletsch Glacier has retreated by more than three kilometres. "
         "Scientists at ETH Zürich measure its thickness with radar every year. "
         "Meltwater from the glacier feeds the Massa river. "
         "A hydroelectric dam on the Massa river uses this meltwater to generate electricity. "
         "The region was named a UNESCO World Heritage Site in 2001.",
         {"Aletsch Glacier", "Alps", "Jungfrau", "Rhône valley", "Concordia Place", "ETH Zürich", "Massa river",
          "hydroelectric dam", "UNESCO"},
         {{"Where do the tributary glaciers meet?",
           "Concordia Place is the point where three tributary glaciers meet.",
           {"The Aletsch Glacier has tributary glaciers.", "They meet at Concordia Place."}},
          {"How much has the glacier retreated?",
           "Since 1870 the Aletsch Glacier has retreated by more than three kilometres.",
           {"The Aletsch Glacier is the largest glacier in the Alps.", "The Aletsch Glacier retreated three kilometres since 1870."}},
          {"Who measures the glacier thickness?",
           "Scientists at ETH Zürich measure its thickness with radar every year.",
           {"ETH Zürich studies the Aletsch Glacier.", "ETH Zürich measures thickness with radar."}},
          {"What uses the meltwater?",
           "A hydroelectric dam on the Massa river uses this meltwater to generate electricity.",
           {"Meltwater feeds the Massa river.", "The hydroelectric dam uses the meltwater."}}}},
    };
    return docs;
}

gechat::ChunkParams corpus_chunking() { return {260, 60}; }

void add_graph_rules(ScriptedChat& chat, const std::vector<Chunk>& chunks, const std::vector<std::string>& vocabulary) {
    for (const auto& c : chunks) {
        const std::string hay = gechat::text::normalize(c.text);
        std::vector<std::string> present;
        for (const auto& v : vocabulary) {
            if (hay.find(gechat::text::normalize(v)) != std::string::npos) present.push_back(v);
        }
        std::string ents;
        for (const auto& p : present) ents += "ENTITY\t" + p + "\t" + p + " as described in the passage.\n";
        chat.add_rule({{"[Entity Extraction]", c.text}, ents + "END\n"});
        std::string rels;
        for (std::size_t i = 0; i + 1 < present.size(); ++i) {
            rels += "REL\t" + present[i] + "\t" + present[i + 1] + "\tmentioned with\tBoth appear in the passage.\n";
        }
        chat.add_rule({{"[Relation Probing]", c.text}, rels + "END\n"});
    }
}

void add_answer_rule(ScriptedChat& chat, const Question& q) {
    chat.add_rule({{"[Question]\n" + q.text}, gechat::render_cot_reply(q.answer, q.steps)});
}

gechat::Providers corpus_providers(std::shared_ptr<ScriptedChat>* chat_out) {
    auto chat = std::make_shared<ScriptedChat>();
    for (const auto& d : corpus()) {
        const auto doc = gechat::load_document(d.source_name, d.text);
        add_graph_rules(*chat, gechat::chunk_document(doc, corpus_chunking()), d.vocabulary);
        for (const auto& q : d.questions) add_answer_rule(*chat, q);
    }
    if (chat_out) *chat_out = chat;
    gechat::Providers p;
    p.chat = chat;
    p.embed = std::make_shared<gechat::HashingEmbedding>(256);
    p.nli = std::make_shared<gechat::ScriptedNli>(gechat::NliFallback::token_overlap);
    return p;
}

}  // namespace fixture
