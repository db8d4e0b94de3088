// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

// Regenerates assets/bpe_toy.vocab: a small BPE vocabulary learned from the
// class names, prompt templates and a few hundred words of everyday sound
// vocabulary.
//
//   make_vocab [output-path] [vocab-size]

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "lsac/bpe.hpp"
#include "../src/binary_io.hpp"

namespace {

const char* const kCorpus[] = {
    // Prompt templates.
    "an audio clip of", "a clip of", "a sound of", "the sound of", "a recording of", "this is a sound of",
    "this is the sound of", "audio of", "a sound clip of", "listen to the sound of", "you can hear",
    // Environmental categories.
    "dog rooster pig cow frog cat hen insects sheep crow",
    "rain sea waves crackling fire crickets chirping birds water drops wind pouring water toilet flush thunderstorm",
    "crying baby sneezing clapping breathing coughing footsteps laughing brushing teeth snoring drinking sipping",
    "door wood knock mouse click keyboard typing door wood creaks can opening washing machine vacuum cleaner "
    "clock alarm clock tick glass breaking",
    "helicopter chainsaw siren car horn engine train church bells airplane fireworks hand saw",
    // Urban categories.
    "air conditioner car horn children playing dog bark drilling engine idling gun shot jackhammer siren street music",
    // Synthetic tone labels.
    "tone 300 hz tone 424 hz tone 600 hz tone 849 hz tone 1200 hz tone 1697 hz tone 2400 hz tone 3394 hz",
    "tone 4800 hz tone 6788 hz hertz frequency pitch low high mid sine wave pure tone beep hum buzz",
    "0 1 2 3 4 5 6 7 8 9 10 11 12 100 1000 khz db",
    // General sound vocabulary.
    "loud quiet soft sharp distant close near far heavy light fast slow steady sudden short long repeated continuous",
    "noise noisy silence silent background foreground outdoor indoor room hall street road city park forest field",
    "kitchen bathroom bedroom office garden beach river lake ocean mountain village market station airport",
    "animal animals bird birds dogs cats insect bee bees fly flies mosquito horse horses goat duck ducks chicken",
    "owl pigeon seagull wolf lion tiger bear monkey elephant whale dolphin frog frogs toad cricket cicada",
    "barking bark barks meow meowing purring purr growl growling howl howling chirp chirps singing song songs",
    "tweet tweeting quack quacking oink moo mooing baa bleat bleating cluck clucking crowing caw cawing buzzing",
    "human people person man woman child children kid kids baby babies crowd voice voices talking speech speaking",
    "shout shouting scream screaming whisper whispering cry crying laugh laugh giggle sigh sniff snore cough sneeze",
    "hands clap claps applause footstep steps walking running jumping dancing chewing eating drinking swallowing",
    "water rain raining drops drop dripping drip splash splashing pour pouring flowing stream waves wave surf",
    "wind windy breeze storm thunder lightning hail snow ice fire flames burning crackle crackling",
    "machine machines motor motors engine engines car cars truck trucks bus buses motorcycle bike bicycle",
    "plane planes jet aircraft helicopter rotor train trains railway subway tram boat ship horn horns honk honking",
    "siren sirens alarm alarms bell bells ring ringing ding dong chime chimes whistle whistling",
    "tool tools drill drilling saw sawing hammer hammering jackhammer chainsaw grinder grinding cutting sanding",
    "door doors window windows knock knocking creak creaking squeak squeaking slam slamming open opening close closing",
    "glass glasses break breaking shatter shattering metal wood wooden plastic paper cardboard stone brick",
    "clock clocks tick ticking tock alarm timer watch beep beeping buzzer",
    "computer keyboard keys typing mouse click clicking phone telephone ringtone vibration notification",
    "music musical instrument instruments guitar piano violin drum drums drumming flute trumpet saxophone bass",
    "melody rhythm beat beats chord chords note notes played playing performance band orchestra concert",
    "vacuum cleaner washing machine dishwasher fan fans air conditioner heater refrigerator fridge microwave",
    "toilet flush flushing sink tap faucet shower bath brushing teeth toothbrush hair dryer razor",
    "can cans bottle bottles opening pop popping fizz fizzing crunch crunching rustle rustling crinkle",
    "gun guns shot shots gunshot gunshots firework fireworks explosion explosions bang bangs boom blast",
    "church bells tower ringing tolling chapel temple ceremony celebration festival party",
    "street traffic horn horns road construction site worker workers building buildings hammer",
    "the a an of and or in on at to from with without by for over under into onto near behind",
    "is are was were be being been has have had do does did can could will would should may might",
    "this that these those there here it its they them their he she his her we our you your",
    "one two three four five six seven eight nine ten first second third many few some several all",
    "sound sounds audio clip clips recording recordings sample samples event events scene scenes class classes",
    "label labels category categories example examples dataset data train training test testing model",
    "environmental urban natural domestic mechanical electronic acoustic ambient",
};

}  // namespace

int main(int argc, char** argv) {
    const std::string out = argc > 1 ? argv[1] : lsac::asset_path("bpe_toy.vocab").string();
    const std::size_t size = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 1024;
    std::vector<std::string> corpus(std::begin(kCorpus), std::end(kCorpus));
    const lsac::BpeVocab vocab = lsac::learn_bpe(corpus, size);
    lsac::io::write_file(out, vocab.serialize());
    std::printf("wrote %s: %zu tokens, %zu merges\n", out.c_str(), vocab.size(), vocab.merges().size());
    return 0;
}
