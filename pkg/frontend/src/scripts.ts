/**
 * Bundled replay scripts.  These are verbatim copies of the engine's
 * own script files (a test cross-checks the bytes), so the replay
 * buttons reproduce exactly the transcripts the batch runner produces.
 */

export interface ReplayScript {
  name: string;
  label: string;
  text: string;
}

export const REPETITION: ReplayScript = {
  name: "repetition",
  label: "Replay: repetition code",
  text: `// Three-qubit repetition code: refine a recovery routine that maps any
// single-bit-flip corruption of the encoded state back to the code word.
// Qubits q1 q2 q3 carry the repetition code, a is the entangled reference.

Def Peq := [|00⟩] ∨ [|11⟩].
Def Pe0 := 0.5 [|0000⟩ + |1111⟩].
Def Pe1 := 0.5 [|1000⟩ + |0111⟩].
Def Pe2 := 0.5 [|0100⟩ + |1011⟩].
Def Pe3 := 0.5 [|0010⟩ + |1101⟩].
Def Pe := Pe0 ∨ Pe1 ∨ Pe2 ∨ Pe3.

Refine Rep : < Pe[q1 q2 q3 a], Pe0[q1 q2 q3 a] >.
Step If Peq[q1 q2].
Step If Peq[q2 q3].
WeakenPre Pe0[q1 q2 q3 a].
Step skip.
WeakenPre Pe3[q1 q2 q3 a].
Step X[q3].
Step If Peq[q2 q3].
WeakenPre Pe1[q1 q2 q3 a].
Step X[q1].
WeakenPre Pe2[q1 q2 q3 a].
Step X[q2].
End.
`,
};

export const ROTATION: ReplayScript = {
  name: "rotation",
  label: "Replay: rotation gate",
  text: `// Probabilistic synthesis of the z-rotation by arccos(3/5): a Toffoli/S
// sandwich succeeds with probability 5/8; wrapping it in a loop retries
// until both control qubits measure 00.  Run with the companion config
// (zrotation_config.json), which injects the target rotation as Rz.

Def P00 := [|00⟩].
Def Pnot00 := P00^⊥.
Eval P00.
Test P00[p q] ∧ Pp[p] <= c0[].

Def pCircuit := Prog H[q0]; H[q1]; CCX[q0 q1 t]; S[t]; CCX[q0 q1 t]; H[q0]; H[q1]; if Pnot00[q0 q1] then Z[t] else skip end.

Def ex := Prog < P0[q], P1[q] > <= X[q].

Refine pf : < Omega[t t'], Rz[t] * Omega[t t'] * Rz[t]† >.
Step Seq Pnot00[q0 q1] * Omega[t t'].
Step [q0 q1] :=0; X[q0].
Def Inv0 := (Pnot00[q0 q1] ⊗ Omega[t t']) ∨ (P00[q0 q1] ⊗ (Rz[t] * Omega[t t'] * Rz[t]†)).
Step While Pnot00[q0 q1] Inv IQOPT Inv0.
Step Seq P00[q0 q1] ⊗ Omega[t t'].
Step [q0 q1] :=0.
Step proc pCircuit.
End.
Show pf.
Def S0 := Extract pf.
Show S0.
Def rho := [[proc S0]](Pp[t]).
Show rho.
`,
};

export const REPLAY_SCRIPTS: ReplayScript[] = [REPETITION, ROTATION];

/**
 * Split a script into single commands ready for POST /command.  Line
 * comments are dropped; a command ends at a line whose last character
 * is the terminating dot.  (Every bundled script is written one command
 * per line, so no dot-inside-number handling is needed here — the
 * engine re-parses each slice anyway and would reject a bad split.)
 */
export function splitCommands(text: string): string[] {
  const commands: string[] = [];
  let current: string[] = [];
  for (const rawLine of text.split("\n")) {
    const line = rawLine.replace(/\/\/.*$/, "").trimEnd();
    if (line.trim() === "") continue;
    current.push(line);
    if (line.endsWith(".")) {
      commands.push(current.join("\n"));
      current = [];
    }
  }
  return commands;
}
