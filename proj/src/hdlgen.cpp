#include "snnforge/hdlgen.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "snnforge/codec.hpp"
#include "snnforge/error.hpp"

namespace snnforge::hdl {

namespace {

// Smallest b with 2^b >= n.
int ceil_log2(std::uint64_t n) {
    int b = 0;
    while (b < 64 && (std::uint64_t{1} << b) < n) ++b;
    return b;
}

// Bits needed to hold every value in [0, n - 1], at least one.
int index_bits(std::uint64_t n) { return std::max(1, ceil_log2(n)); }

std::string bits_of(std::int64_t value, int bits) {
    std::string s(static_cast<std::size_t>(bits), '0');
    const auto u = static_cast<std::uint64_t>(value);
    for (int b = 0; b < bits; ++b) {
        if ((u >> b) & 1u) s[static_cast<std::size_t>(bits - 1 - b)] = '1';
    }
    return s;
}

std::string num(std::uint64_t v) { return std::to_string(v); }

class Text {
public:
    Text& operator()(const std::string& line = {}) {
        out_ += line;
        out_ += '\n';
        return *this;
    }
    std::string str() const { return out_; }

private:
    std::string out_;
};

std::string slv(std::uint64_t width) { return "std_logic_vector(" + num(width - 1) + " downto 0)"; }

const char* kLibraries = "library ieee;\nuse ieee.std_logic_1164.all;\nuse ieee.numeric_std.all;";

std::string header(const NetworkSpec& spec, const std::string& what) {
    return "-- " + what + " for network '" + spec.name + "', generated by snnforge. VHDL-2008.";
}

std::string neuron_entity(const NeuronSpec& reduced) {
    return "neuron_" + variant_name(reduced.model);
}

std::size_t acc_bits(const NetworkSpec& spec, const LayerSpec& layer) {
    const auto n = static_cast<std::size_t>(layer.neuron.neuron_bits.bits());
    if (spec.accumulator == Accumulator::Saturating) return n;
    // every addend is clamped to the neuron width, so this never overflows
    return n + static_cast<std::size_t>(ceil_log2(layer.n_inputs + (layer.recurrent() ? layer.n_neurons : 0) + 1));
}

std::string emit_neuron(const NetworkSpec& spec, const NeuronModel m) {
    const bool lif2 = m.order == NeuronOrder::LIF2;
    const bool leaky = m.order != NeuronOrder::IF;
    const bool stat = m.reset == ResetMode::Static;
    const std::string name = "neuron_" + variant_name(m);
    Text t;
    t(header(spec, std::string(to_string(m.order)) + " neuron with " + std::string(to_string(m.reset)) + " reset"));
    t(kLibraries)();
    t("entity " + name + " is");
    t("  generic (");
    t("    N_BITS      : positive;");
    t("    ACC_BITS    : positive;");
    if (lif2) t("    ALPHA_SHIFT : natural;");
    if (leaky) t("    BETA_SHIFT  : natural;");
    if (lif2) t("    IMMEDIATE   : boolean := false;");
    if (stat) t("    V_RESET     : std_logic_vector(N_BITS - 1 downto 0);");
    t("    V_TH        : std_logic_vector(N_BITS - 1 downto 0)");
    t("  );");
    t("  port (");
    t("    clk     : in  std_logic;");
    t("    rst     : in  std_logic;");
    t("    acc_clr : in  std_logic;");
    t("    acc_en  : in  std_logic;");
    t("    weight  : in  signed(N_BITS - 1 downto 0);");
    t("    start   : in  std_logic;");
    t("    ready   : out std_logic;");
    t("    spike   : out std_logic");
    t("  );");
    t("end entity;")();
    t("architecture rtl of " + name + " is");
    t("  function sat(x : signed; n : positive) return signed is");
    t("    variable hi : signed(n - 1 downto 0) := (others => '1');");
    t("    variable lo : signed(n - 1 downto 0) := (others => '0');");
    t("  begin");
    t("    hi(n - 1) := '0';");
    t("    lo(n - 1) := '1';");
    t("    if x > hi then");
    t("      return hi;");
    t("    elsif x < lo then");
    t("      return lo;");
    t("    end if;");
    t("    return resize(x, n);");
    t("  end function;")();
    t("  function add(a, b : signed; n : positive) return signed is");
    t("  begin");
    t("    return sat(resize(a, n + 1) + resize(b, n + 1), n);");
    t("  end function;")();
    if (!stat) {
        t("  function sub(a, b : signed; n : positive) return signed is");
        t("  begin");
        t("    return sat(resize(a, n + 1) - resize(b, n + 1), n);");
        t("  end function;")();
    }
    if (leaky) {
        t("  -- x * (1 - 2^-k); a shift of 0 disables the stage");
        t("  function leak(x : signed; k : natural) return signed is");
        t("  begin");
        t("    if k = 0 then");
        t("      return x;");
        t("    end if;");
        t("    return x - shift_right(x, k);");
        t("  end function;")();
    }
    t("  signal acc   : signed(ACC_BITS - 1 downto 0) := (others => '0');");
    t("  signal v     : signed(N_BITS - 1 downto 0) := (others => '0');");
    if (lif2) t("  signal i_syn : signed(N_BITS - 1 downto 0) := (others => '0');");
    t("  signal spk   : std_logic := '0';");
    t("  signal done  : std_logic := '0';");
    t("begin");
    t("  ready <= done;");
    t("  spike <= spk;")();
    t("  process (clk)");
    t("    variable x      : signed(N_BITS - 1 downto 0);");
    if (lif2) t("    variable i_next : signed(N_BITS - 1 downto 0);");
    t("    variable v_next : signed(N_BITS - 1 downto 0);");
    t("  begin");
    t("    if rising_edge(clk) then");
    t("      if rst = '1' then");
    t("        acc <= (others => '0');");
    t("        v <= (others => '0');");
    if (lif2) t("        i_syn <= (others => '0');");
    t("        spk <= '0';");
    t("        done <= '0';");
    t("      else");
    t("        done <= '0';");
    t("        if acc_clr = '1' then");
    t("          acc <= (others => '0');");
    t("        elsif acc_en = '1' then");
    t("          acc <= add(acc, weight, ACC_BITS);");
    t("        end if;");
    t("        if start = '1' then");
    t("          x := sat(acc, N_BITS);");
    switch (m.order) {
    case NeuronOrder::IF:
        t("          v_next := add(v, x, N_BITS);");
        break;
    case NeuronOrder::LIF1:
        t("          v_next := add(leak(v, BETA_SHIFT), x, N_BITS);");
        break;
    case NeuronOrder::LIF2:
        t("          i_next := add(leak(i_syn, ALPHA_SHIFT), x, N_BITS);");
        t("          if IMMEDIATE then");
        t("            v_next := add(leak(v, BETA_SHIFT), i_next, N_BITS);");
        t("          else");
        t("            v_next := add(leak(v, BETA_SHIFT), i_syn, N_BITS);");
        t("          end if;");
        t("          i_syn <= i_next;");
        break;
    }
    t("          if v_next > signed(V_TH) then");
    t("            spk <= '1';");
    t(stat ? "            v <= signed(V_RESET);" : "            v <= sub(v_next, signed(V_TH), N_BITS);");
    t("          else");
    t("            spk <= '0';");
    t("            v <= v_next;");
    t("          end if;");
    t("          done <= '1';");
    t("        end if;");
    t("      end if;");
    t("    end if;");
    t("  end process;");
    t("end architecture;");
    return t.str();
}

std::string emit_layer(const NetworkSpec& spec, std::size_t index) {
    const LayerSpec& layer = spec.layers[index];
    const NeuronSpec reduced = reduce_model(layer.neuron);
    const std::string name = "layer_" + num(index + 1);
    const std::size_t n_in = layer.n_inputs, n_neu = layer.n_neurons;
    const int nb = layer.neuron.neuron_bits.bits();
    const int ff_w = layer.w_ff.format().bits();
    const bool rec = layer.recurrent();
    const int fb_w = rec ? layer.w_fb->format().bits() : 0;
    const int cnt_bits = index_bits(std::max(n_in, rec ? n_neu : std::size_t{0}));

    Text t;
    t(header(spec, "layer " + num(index + 1) + " with its control unit and synapse memories"));
    t(kLibraries);
    t("use std.textio.all;")();
    t("entity " + name + " is");
    t("  port (");
    t("    clk        : in  std_logic;");
    t("    rst        : in  std_logic;");
    t("    start      : in  std_logic;");
    t("    ready      : out std_logic;");
    t("    in_spikes  : in  " + slv(n_in) + ";");
    t("    out_spikes : out " + slv(n_neu));
    t("  );");
    t("end entity;")();
    t("architecture rtl of " + name + " is");
    t("  constant N_IN   : natural := " + num(n_in) + ";");
    t("  constant N_NEU  : natural := " + num(n_neu) + ";");
    t("  constant N_BITS : natural := " + num(static_cast<std::uint64_t>(nb)) + ";");
    t("  constant FF_W   : natural := " + num(static_cast<std::uint64_t>(ff_w)) + ";");
    if (rec) t("  constant FB_W   : natural := " + num(static_cast<std::uint64_t>(fb_w)) + ";");
    t();
    // one word per address, neuron 0 in the most significant slot
    const auto memory = [&](const std::string& tag, const std::string& depth, const std::string& width) {
        t("  type " + tag + "_mem_t is array (0 to " + depth + " - 1) of bit_vector(N_NEU * " + width + " - 1 downto 0);");
        t();
        t("  impure function load_" + tag + "(path : string) return " + tag + "_mem_t is");
        t("    file f     : text open read_mode is path;");
        t("    variable l : line;");
        t("    variable m : " + tag + "_mem_t;");
        t("  begin");
        t("    for a in m'range loop");
        t("      readline(f, l);");
        t("      read(l, m(a));");
        t("    end loop;");
        t("    return m;");
        t("  end function;")();
        t("  signal " + tag + "_mem : " + tag + "_mem_t := load_" + tag + "(\"" + mem_file_name(index + 1, tag == "fb") +
          "\");");
        t();
    };
    memory("ff", "N_IN", "FF_W");
    if (rec) memory("fb", "N_NEU", "FB_W");

    t("  -- sign-extend or saturate a stored weight to the neuron width");
    t("  function fit(x : signed; n : positive) return signed is");
    t("    variable hi : signed(n - 1 downto 0) := (others => '1');");
    t("    variable lo : signed(n - 1 downto 0) := (others => '0');");
    t("  begin");
    t("    if x'length <= n then");
    t("      return resize(x, n);");
    t("    end if;");
    t("    hi(n - 1) := '0';");
    t("    lo(n - 1) := '1';");
    t("    if x > hi then");
    t("      return hi;");
    t("    elsif x < lo then");
    t("      return lo;");
    t("    end if;");
    t("    return resize(x, n);");
    t("  end function;")();
    t(rec ? "  type state_t is (S_IDLE, S_FF, S_FB, S_UPDATE, S_WAIT);"
          : "  type state_t is (S_IDLE, S_FF, S_UPDATE, S_WAIT);");
    t("  signal state     : state_t := S_IDLE;");
    t("  signal in_q      : " + slv(n_in) + " := (others => '0');");
    if (rec) t("  signal fb_q      : " + slv(n_neu) + " := (others => '0');");
    t("  signal out_q     : " + slv(n_neu) + " := (others => '0');");
    t("  signal cnt       : unsigned(" + num(static_cast<std::uint64_t>(cnt_bits - 1)) + " downto 0) := (others => '0');");
    t("  signal ff_word   : bit_vector(" + num(n_neu * static_cast<std::uint64_t>(ff_w) - 1) +
      " downto 0) := (others => '0');");
    if (rec) {
        t("  signal fb_word   : bit_vector(" + num(n_neu * static_cast<std::uint64_t>(fb_w) - 1) +
          " downto 0) := (others => '0');");
        t("  signal rd_fb     : std_logic := '0';");
    }
    t("  signal rd_spike  : std_logic := '0';");
    t("  signal rd_valid  : std_logic := '0';");
    t("  signal ff_any    : std_logic;");
    if (rec) t("  signal fb_any    : std_logic;");
    t("  signal acc_clr   : std_logic := '0';");
    t("  signal acc_en    : std_logic;");
    t("  signal n_start   : std_logic := '0';");
    t("  signal n_ready   : " + slv(n_neu) + ";");
    t("  signal n_spike   : " + slv(n_neu) + ";");
    t("  signal all_ready : std_logic;");
    t("begin");
    t("  -- skip gates: with no incoming spike the step only applies the leak");
    t("  ff_any <= or in_spikes;");
    if (rec) t("  fb_any <= or out_q;");
    t("  all_ready <= and n_ready;");
    t("  acc_en <= rd_valid and rd_spike;");
    t("  ready <= '1' when state = S_IDLE else '0';");
    t("  out_spikes <= out_q;")();
    t("  control : process (clk)");
    t("  begin");
    t("    if rising_edge(clk) then");
    t("      if rst = '1' then");
    t("        state <= S_IDLE;");
    t("        in_q <= (others => '0');");
    if (rec) t("        fb_q <= (others => '0');");
    t("        out_q <= (others => '0');");
    t("        cnt <= (others => '0');");
    t("        rd_valid <= '0';");
    t("        acc_clr <= '0';");
    t("        n_start <= '0';");
    t("      else");
    t("        rd_valid <= '0';");
    t("        acc_clr <= '0';");
    t("        n_start <= '0';");
    t("        case state is");
    t("          when S_IDLE =>");
    t("            if start = '1' then");
    t("              in_q <= in_spikes;");
    if (rec) t("              fb_q <= out_q;");
    t("              acc_clr <= '1';");
    t("              cnt <= (others => '0');");
    t("              if ff_any = '1' then");
    t("                state <= S_FF;");
    if (rec) {
        t("              elsif fb_any = '1' then");
        t("                state <= S_FB;");
    }
    t("              else");
    t("                state <= S_UPDATE;");
    t("              end if;");
    t("            end if;");
    t("          when S_FF =>");
    t("            ff_word <= ff_mem(to_integer(cnt));");
    t("            rd_spike <= in_q(to_integer(cnt));");
    if (rec) t("            rd_fb <= '0';");
    t("            rd_valid <= '1';");
    t("            if cnt = N_IN - 1 then");
    t("              cnt <= (others => '0');");
    if (rec) {
        t("              if fb_any = '1' then");
        t("                state <= S_FB;");
        t("              else");
        t("                state <= S_UPDATE;");
        t("              end if;");
    } else {
        t("              state <= S_UPDATE;");
    }
    t("            else");
    t("              cnt <= cnt + 1;");
    t("            end if;");
    if (rec) {
        t("          when S_FB =>");
        t("            fb_word <= fb_mem(to_integer(cnt));");
        t("            rd_spike <= fb_q(to_integer(cnt));");
        t("            rd_fb <= '1';");
        t("            rd_valid <= '1';");
        t("            if cnt = N_NEU - 1 then");
        t("              cnt <= (others => '0');");
        t("              state <= S_UPDATE;");
        t("            else");
        t("              cnt <= cnt + 1;");
        t("            end if;");
    }
    t("          when S_UPDATE =>");
    t("            n_start <= '1';");
    t("            state <= S_WAIT;");
    t("          when S_WAIT =>");
    t("            if all_ready = '1' then");
    t("              out_q <= n_spike;");
    t("              state <= S_IDLE;");
    t("            end if;");
    t("        end case;");
    t("      end if;");
    t("    end if;");
    t("  end process;")();

    std::string generics = "N_BITS => " + num(static_cast<std::uint64_t>(nb)) +
                           ", ACC_BITS => " + num(acc_bits(spec, layer));
    if (reduced.alpha_shift) generics += ", ALPHA_SHIFT => " + num(static_cast<std::uint64_t>(*reduced.alpha_shift));
    if (reduced.beta_shift) generics += ", BETA_SHIFT => " + num(static_cast<std::uint64_t>(*reduced.beta_shift));
    if (reduced.model.order == NeuronOrder::LIF2) {
        generics += std::string(", IMMEDIATE => ") + (reduced.immediate_current ? "true" : "false");
    }
    if (reduced.model.reset == ResetMode::Static) {
        generics += ", V_RESET => \"" + bits_of(reduced.v_reset.raw(), nb) + "\"";
    }
    generics += ", V_TH => \"" + bits_of(reduced.v_th.raw(), nb) + "\"";

    const auto slot = [](const std::string& word, const std::string& w) {
        return "fit(signed(to_stdlogicvector(" + word + "((N_NEU - i) * " + w + " - 1 downto (N_NEU - 1 - i) * " + w +
               "))), N_BITS)";
    };
    t("  neurons : for i in 0 to N_NEU - 1 generate");
    t("    signal weight : signed(" + num(static_cast<std::uint64_t>(nb - 1)) + " downto 0);");
    t("  begin");
    if (rec) {
        t("    weight <= " + slot("fb_word", "FB_W") + " when rd_fb = '1' else");
        t("              " + slot("ff_word", "FF_W") + ";");
    } else {
        t("    weight <= " + slot("ff_word", "FF_W") + ";");
    }
    t("    u_neuron : entity work." + neuron_entity(reduced));
    t("      generic map (" + generics + ")");
    t("      port map (clk => clk, rst => rst, acc_clr => acc_clr, acc_en => acc_en, weight => weight,");
    t("                start => n_start, ready => n_ready(i), spike => n_spike(i));");
    t("  end generate;");
    t("end architecture;");
    return t.str();
}

std::string emit_network_cu(const NetworkSpec& spec) {
    const std::size_t n_layers = spec.layers.size();
    const int cw = counter_width(spec.n_cycles);
    const bool immediate = spec.propagation == Propagation::Immediate;
    Text t;
    t(header(spec, std::string("network control unit, ") + std::string(to_string(spec.propagation)) + " propagation"));
    t(kLibraries)();
    t("entity network_cu is");
    t("  port (");
    t("    clk         : in  std_logic;");
    t("    rst         : in  std_logic;");
    t("    start       : in  std_logic;");
    t("    ready       : out std_logic;");
    t("    layer_start : out " + slv(n_layers) + ";");
    t("    layer_ready : in  " + slv(n_layers) + ";");
    t("    in_req      : out std_logic;");
    t("    sample      : out std_logic;");
    t("    clear       : out std_logic");
    t("  );");
    t("end entity;")();
    t("architecture rtl of network_cu is");
    t("  constant N_CYCLES : natural := " + num(spec.n_cycles) + ";");
    if (immediate) t("  constant N_LAYERS : natural := " + num(n_layers) + ";");
    t("  type state_t is (S_IDLE, S_START, S_WAIT, S_FETCH, S_DONE);");
    t("  signal state     : state_t := S_IDLE;");
    t("  signal cnt       : unsigned(" + num(static_cast<std::uint64_t>(cw - 1)) + " downto 0) := (others => '0');");
    if (immediate) {
        t("  signal lay       : natural range 0 to N_LAYERS - 1 := 0;");
    } else {
        t("  signal all_ready : std_logic;");
    }
    t("  signal sample_q  : std_logic := '0';");
    t("  signal clear_q   : std_logic := '0';");
    t("begin");
    if (immediate) {
        t("  -- layers run one after another within a timestep");
        t("  starts : for k in 0 to N_LAYERS - 1 generate");
        t("    layer_start(k) <= '1' when state = S_START and lay = k else '0';");
        t("  end generate;");
    } else {
        t("  -- every layer runs concurrently on the previous step's spikes");
        t("  all_ready <= and layer_ready;");
        t("  layer_start <= (others => '1') when state = S_START else (others => '0');");
    }
    t("  ready <= '1' when state = S_IDLE else '0';");
    t("  in_req <= '1' when state = S_FETCH else '0';");
    t("  sample <= sample_q;");
    t("  clear <= clear_q;")();
    t("  process (clk)");
    t("  begin");
    t("    if rising_edge(clk) then");
    t("      if rst = '1' then");
    t("        state <= S_IDLE;");
    t("        cnt <= (others => '0');");
    if (immediate) t("        lay <= 0;");
    t("        sample_q <= '0';");
    t("        clear_q <= '0';");
    t("      else");
    t("        sample_q <= '0';");
    t("        clear_q <= '0';");
    t("        case state is");
    t("          when S_IDLE =>");
    t("            if start = '1' then");
    t("              cnt <= (others => '0');");
    if (immediate) t("              lay <= 0;");
    t("              clear_q <= '1';");
    t("              state <= S_START;");
    t("            end if;");
    t("          when S_START =>");
    t("            state <= S_WAIT;");
    t("          when S_WAIT =>");
    std::string indent = "            ";
    if (immediate) {
        t("            if layer_ready(lay) = '1' then");
        t("              if lay /= N_LAYERS - 1 then");
        t("                lay <= lay + 1;");
        t("                state <= S_START;");
        t("              else");
        t("                lay <= 0;");
        indent = "                ";
    } else {
        t("            if all_ready = '1' then");
        indent = "              ";
    }
    t(indent + "sample_q <= '1';");
    t(indent + "if cnt = N_CYCLES - 1 then");
    t(indent + "  state <= S_DONE;");
    t(indent + "else");
    t(indent + "  cnt <= cnt + 1;");
    t(indent + "  state <= S_FETCH;");
    t(indent + "end if;");
    if (immediate) t("              end if;");
    t("            end if;");
    t("          when S_FETCH =>");
    t("            state <= S_START;");
    t("          when S_DONE =>");
    t("            state <= S_IDLE;");
    t("        end case;");
    t("      end if;");
    t("    end if;");
    t("  end process;");
    t("end architecture;");
    return t.str();
}

std::string emit_counters(const NetworkSpec& spec) {
    const std::size_t n_out = spec.n_outputs();
    const auto cw = static_cast<std::size_t>(counter_width(spec.n_cycles));
    Text t;
    t(header(spec, "saturating output spike counters"));
    t(kLibraries)();
    t("entity counters is");
    t("  port (");
    t("    clk    : in  std_logic;");
    t("    rst    : in  std_logic;");
    t("    start  : in  std_logic;");
    t("    ready  : out std_logic;");
    t("    sample : in  std_logic;");
    t("    spikes : in  " + slv(n_out) + ";");
    t("    counts : out " + slv(n_out * cw));
    t("  );");
    t("end entity;")();
    t("architecture rtl of counters is");
    t("  constant N_OUT : natural := " + num(n_out) + ";");
    t("  constant CW    : natural := " + num(cw) + ";");
    t("  type count_array is array (0 to N_OUT - 1) of unsigned(CW - 1 downto 0);");
    t("  signal c : count_array := (others => (others => '0'));");
    t("begin");
    t("  ready <= '1';")();
    t("  -- output k occupies counts((k + 1) * CW - 1 downto k * CW)");
    t("  outs : for k in 0 to N_OUT - 1 generate");
    t("    counts((k + 1) * CW - 1 downto k * CW) <= std_logic_vector(c(k));");
    t("  end generate;")();
    t("  process (clk)");
    t("  begin");
    t("    if rising_edge(clk) then");
    t("      if rst = '1' or start = '1' then");
    t("        c <= (others => (others => '0'));");
    t("      elsif sample = '1' then");
    t("        for k in 0 to N_OUT - 1 loop");
    t("          if spikes(k) = '1' and (and c(k)) = '0' then");
    t("            c(k) <= c(k) + 1;");
    t("          end if;");
    t("        end loop;");
    t("      end if;");
    t("    end if;");
    t("  end process;");
    t("end architecture;");
    return t.str();
}

std::string emit_top(const NetworkSpec& spec) {
    const std::size_t n_layers = spec.layers.size();
    const auto cw = static_cast<std::size_t>(counter_width(spec.n_cycles));
    Text t;
    t(header(spec, "top level"));
    t(kLibraries)();
    t("entity top is");
    t("  port (");
    t("    clk       : in  std_logic;");
    t("    rst       : in  std_logic;");
    t("    start     : in  std_logic;");
    t("    ready     : out std_logic;");
    t("    in_spikes : in  " + slv(spec.n_inputs()) + ";");
    t("    in_req    : out std_logic;");
    t("    counts    : out " + slv(spec.n_outputs() * cw));
    t("  );");
    t("end entity;")();
    t("architecture rtl of top is");
    t("  signal layer_start : " + slv(n_layers) + ";");
    t("  signal layer_ready : " + slv(n_layers) + ";");
    t("  signal sample      : std_logic;");
    t("  signal clear       : std_logic;");
    for (std::size_t l = 0; l < n_layers; ++l) {
        t("  signal spikes_" + num(l + 1) + "    : " + slv(spec.layers[l].n_neurons) + ";");
    }
    t("begin");
    t("  u_cu : entity work.network_cu");
    t("    port map (clk => clk, rst => rst, start => start, ready => ready, layer_start => layer_start,");
    t("              layer_ready => layer_ready, in_req => in_req, sample => sample, clear => clear);")();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::string k = num(l), name = num(l + 1);
        const std::string in = l == 0 ? "in_spikes" : "spikes_" + num(l);
        t("  u_layer_" + name + " : entity work.layer_" + name);
        t("    port map (clk => clk, rst => rst, start => layer_start(" + k + "), ready => layer_ready(" + k + "),");
        t("              in_spikes => " + in + ", out_spikes => spikes_" + name + ");")();
    }
    t("  u_counters : entity work.counters");
    t("    port map (clk => clk, rst => rst, start => clear, ready => open, sample => sample,");
    t("              spikes => spikes_" + num(n_layers) + ", counts => counts);");
    t("end architecture;");
    return t.str();
}

std::string emit_testbench_text(const NetworkSpec& spec, const std::vector<std::uint32_t>* expected) {
    const std::size_t n_in = spec.n_inputs(), n_out = spec.n_outputs();
    const auto cw = static_cast<std::size_t>(counter_width(spec.n_cycles));
    Text t;
    t(header(spec, "file-driven testbench"));
    t(kLibraries);
    t("use std.textio.all;")();
    t("entity testbench is");
    t("  generic (");
    t("    STIMULUS   : string := \"" + std::string(kStimulusFile) + "\";");
    t("    COUNTS_OUT : string := \"" + std::string(kCountsFile) + "\"");
    t("  );");
    t("end entity;")();
    t("architecture sim of testbench is");
    t("  constant N_IN   : natural := " + num(n_in) + ";");
    t("  constant N_OUT  : natural := " + num(n_out) + ";");
    t("  constant CW     : natural := " + num(cw) + ";");
    t("  constant PERIOD : time := 10 ns;");
    if (expected) {
        std::string agg;
        for (std::size_t k = 0; k < expected->size(); ++k) {
            agg += (k ? ", " : "") + num(k) + " => " + num((*expected)[k]);
        }
        t("  type count_array is array (0 to N_OUT - 1) of natural;");
        t("  -- counts produced by the reference simulator on the same stimulus");
        t("  constant EXPECTED : count_array := (" + agg + ");");
    }
    t();
    t("  signal clk       : std_logic := '0';");
    t("  signal rst       : std_logic := '1';");
    t("  signal start     : std_logic := '0';");
    t("  signal ready     : std_logic;");
    t("  signal in_spikes : " + slv(n_in) + " := (others => '0');");
    t("  signal in_req    : std_logic;");
    t("  signal counts    : " + slv(n_out * cw) + ";");
    t("  signal finished  : boolean := false;");
    t("begin");
    t("  clk <= not clk after PERIOD / 2 when not finished else clk;")();
    t("  dut : entity work.top");
    t("    port map (clk => clk, rst => rst, start => start, ready => ready, in_spikes => in_spikes,");
    t("              in_req => in_req, counts => counts);")();
    t("  -- one spike word per timestep, channel 0 leftmost; the next word is");
    t("  -- presented whenever the network requests it");
    t("  feed : process");
    t("    file f     : text open read_mode is STIMULUS;");
    t("    variable l : line;");
    t("    variable w : bit_vector(0 to N_IN - 1);");
    t("  begin");
    t("    readline(f, l);");
    t("    read(l, w);");
    t("    for c in 0 to N_IN - 1 loop");
    t("      in_spikes(c) <= to_stdulogic(w(c));");
    t("    end loop;");
    t("    while not endfile(f) loop");
    t("      wait until rising_edge(clk) and in_req = '1';");
    t("      readline(f, l);");
    t("      read(l, w);");
    t("      for c in 0 to N_IN - 1 loop");
    t("        in_spikes(c) <= to_stdulogic(w(c));");
    t("      end loop;");
    t("    end loop;");
    t("    wait;");
    t("  end process;")();
    t("  control : process");
    t("    file o     : text open write_mode is COUNTS_OUT;");
    t("    variable l : line;");
    t("    variable n : natural;");
    t("  begin");
    t("    wait until rising_edge(clk);");
    t("    wait until rising_edge(clk);");
    t("    rst <= '0';");
    t("    wait until rising_edge(clk);");
    t("    start <= '1';");
    t("    wait until rising_edge(clk);");
    t("    start <= '0';");
    t("    wait until rising_edge(clk) and ready = '1';");
    t("    for k in 0 to N_OUT - 1 loop");
    t("      n := to_integer(unsigned(counts((k + 1) * CW - 1 downto k * CW)));");
    t("      write(l, n);");
    t("      writeline(o, l);");
    if (expected) {
        t("      assert n = EXPECTED(k)");
        t("        report \"output \" & integer'image(k) & \": expected \" & integer'image(EXPECTED(k)) &");
        t("               \", got \" & integer'image(n)");
        t("        severity error;");
    }
    t("    end loop;");
    t("    finished <= true;");
    t("    wait;");
    t("  end process;");
    t("end architecture;");
    return t.str();
}

std::string stimulus_text(const SpikeStream& s) {
    std::string out;
    out.reserve(s.n_steps() * (s.n_channels() + 1));
    for (std::size_t t = 0; t < s.n_steps(); ++t) {
        for (const std::uint8_t b : s.row(t)) out += b ? '1' : '0';
        out += '\n';
    }
    return out;
}

void check_widths(const NetworkSpec& spec) {
    spec.validate();
    const auto check = [](int bits, const std::string& what) {
        if (bits > kMaxBits) throw GenerationError(what + " is " + std::to_string(bits) + " bits; at most 32 are supported");
    };
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& layer = spec.layers[l];
        const std::string where = "layer " + std::to_string(l + 1);
        check(layer.neuron.neuron_bits.bits(), where + " neuron width");
        check(layer.w_ff.format().bits(), where + " feed-forward weight width");
        if (layer.w_fb) check(layer.w_fb->format().bits(), where + " feedback weight width");
    }
    check(counter_width(spec.n_cycles), "output counter width");
}

void check_stimulus(const NetworkSpec& spec, const SpikeStream& stimulus) {
    if (stimulus.n_channels() != spec.n_inputs()) {
        throw UsageError("stimulus has " + std::to_string(stimulus.n_channels()) + " channels, network expects " +
                         std::to_string(spec.n_inputs()));
    }
    if (stimulus.n_steps() != spec.n_cycles) {
        throw UsageError("stimulus has " + std::to_string(stimulus.n_steps()) + " steps, network runs " +
                         std::to_string(spec.n_cycles));
    }
}

} // namespace

std::vector<std::string> HdlBundle::file_names() const {
    std::vector<std::string> names;
    for (const auto& [unit, text] : units) names.push_back(unit + ".vhd");
    for (const auto& [file, text] : memories) names.push_back(file);
    if (stimulus) names.emplace_back(kStimulusFile);
    std::sort(names.begin(), names.end());
    return names;
}

void HdlBundle::write(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw GenerationError("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& [unit, text] : units) codec::write_file(dir / (unit + ".vhd"), text);
    for (const auto& [file, text] : memories) codec::write_file(dir / file, text);
    if (stimulus) codec::write_file(dir / kStimulusFile, *stimulus);
}

std::string mem_file_name(std::size_t layer, bool feedback) {
    return "layer_" + std::to_string(layer) + (feedback ? "_fb.mem" : "_ff.mem");
}

int counter_width(std::size_t n_cycles) { return ceil_log2(std::max<std::size_t>(n_cycles, 1)) + 1; }

HdlBundle generate(const NetworkSpec& spec) {
    check_widths(spec);
    HdlBundle b;
    b.units["top"] = emit_top(spec);
    b.units["network_cu"] = emit_network_cu(spec);
    b.units["counters"] = emit_counters(spec);
    b.units["testbench"] = emit_testbench_text(spec, nullptr);
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& layer = spec.layers[l];
        b.units["layer_" + std::to_string(l + 1)] = emit_layer(spec, l);
        const NeuronSpec reduced = reduce_model(layer.neuron);
        const std::string entity = neuron_entity(reduced);
        if (!b.units.contains(entity)) b.units[entity] = emit_neuron(spec, reduced.model);
        const MemInit mem = emit_meminit(layer);
        b.memories[mem_file_name(l + 1, false)] = mem.ff;
        if (mem.fb) b.memories[mem_file_name(l + 1, true)] = *mem.fb;
    }
    return b;
}

HdlBundle generate(const NetworkSpec& spec, const SpikeStream& stimulus) {
    HdlBundle b = generate(spec);
    Testbench tb = emit_testbench(spec, stimulus);
    b.units["testbench"] = std::move(tb.vhdl);
    b.stimulus = std::move(tb.stimulus);
    return b;
}

std::string emit_meminit(const WeightMatrix& w) {
    const int bits = w.format().bits();
    std::string out;
    out.reserve(w.n_inputs() * (w.n_neurons() * static_cast<std::size_t>(bits) + 1));
    for (std::size_t j = 0; j < w.n_inputs(); ++j) {
        for (const std::int32_t x : w.input_row(j)) out += bits_of(x, bits);
        out += '\n';
    }
    return out;
}

MemInit emit_meminit(const LayerSpec& layer) {
    MemInit m{emit_meminit(layer.w_ff), std::nullopt};
    if (layer.w_fb) m.fb = emit_meminit(*layer.w_fb);
    return m;
}

WeightMatrix parse_meminit(std::string_view text, std::size_t n_neurons, FxpFormat fmt) {
    const auto bits = static_cast<std::size_t>(fmt.bits());
    const std::size_t width = n_neurons * bits;
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    WeightMatrix w(n_neurons, lines.size(), fmt);
    for (std::size_t j = 0; j < lines.size(); ++j) {
        const std::string_view line = lines[j];
        if (line.size() != width) {
            throw ParseError("mem-init line has " + std::to_string(line.size()) + " characters, expected " +
                                 std::to_string(width),
                             j + 1);
        }
        for (std::size_t i = 0; i < n_neurons; ++i) {
            std::uint64_t u = 0;
            for (std::size_t b = 0; b < bits; ++b) {
                const char c = line[i * bits + b];
                if (c != '0' && c != '1') throw ParseError("mem-init line contains '" + std::string(1, c) + "'", j + 1);
                u = (u << 1) | static_cast<std::uint64_t>(c == '1');
            }
            std::int64_t v = static_cast<std::int64_t>(u);
            if (u >> (bits - 1)) v -= std::int64_t{1} << bits;
            w.set(i, j, v);
        }
    }
    return w;
}

Testbench emit_testbench(const NetworkSpec& spec, const SpikeStream& stimulus) {
    check_widths(spec);
    check_stimulus(spec, stimulus);
    Testbench tb;
    tb.expected = run(spec, stimulus).out_counts;
    tb.vhdl = emit_testbench_text(spec, &tb.expected);
    tb.stimulus = stimulus_text(stimulus);
    return tb;
}

} // namespace snnforge::hdl
