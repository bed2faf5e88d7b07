import { describe, expect, it } from "vitest";

import {
  backReferencesOf,
  formatProperty,
  parseEntity,
  parseQueryResponse,
  parseServerError,
  sortRows,
} from "../src/model";
import { parseXml } from "../src/xml";

// shaped exactly like the server's responses to the worked queries
const SELECT_RESPONSE = `<Response><Table><Header>
  <Column name="id"/><Column name="first name"/><Column name="family name"/>
</Header>
<Row><Cell>19</Cell><Cell>Ada</Cell><Cell>Lively</Cell></Row>
<Row><Cell>21</Cell><Cell>Cleo</Cell><Cell>Tanaka</Cell></Row>
</Table></Response>`;

const EXPERIMENT_XML = `<Entity id="14" kind="Record" name="exp2">
  <Parent id="9" name="Experiment"/>
  <Property ref="1" name="date" type="Date" value="2017-06-12" importance="Fix"/>
  <Property ref="2" name="room_temperature" type="Quantity" value="22.5" unit="°C" importance="Fix"/>
</Entity>`;

describe("parseQueryResponse", () => {
  it("renders the worked SELECT query as a three-column table", () => {
    const view = parseQueryResponse(parseXml(SELECT_RESPONSE));
    expect(view.kind).toBe("table");
    if (view.kind !== "table") return;
    expect(view.columns).toEqual(["id", "first name", "family name"]);
    expect(view.rows).toEqual([
      ["19", "Ada", "Lively"],
      ["21", "Cleo", "Tanaka"],
    ]);
  });

  it("reads counts", () => {
    const view = parseQueryResponse(parseXml("<Response><Count>3</Count></Response>"));
    expect(view).toEqual({ kind: "count", count: 3, warnings: [] });
  });

  it("reads entity lists and surfaces warnings", () => {
    const view = parseQueryResponse(
      parseXml(`<Response>${EXPERIMENT_XML}<Warning>incomparable dimensions</Warning></Response>`)
    );
    expect(view.kind).toBe("entities");
    if (view.kind !== "entities") return;
    expect(view.entities).toHaveLength(1);
    expect(view.warnings).toEqual(["incomparable dimensions"]);
  });

  it("treats an empty response as an empty entity list", () => {
    const view = parseQueryResponse(parseXml("<Response/>"));
    expect(view).toEqual({ kind: "entities", entities: [], warnings: [] });
  });
});

describe("parseEntity", () => {
  it("keeps quantity unit symbols for display", () => {
    const card = parseEntity(parseXml(EXPERIMENT_XML));
    expect(card.name).toBe("exp2");
    expect(card.parents).toEqual([{ id: 9, name: "Experiment" }]);
    const temperature = card.properties.find((p) => p.name === "room_temperature");
    expect(temperature && formatProperty(temperature)).toBe("22.5 °C");
  });

  it("reads Null values and list items", () => {
    const card = parseEntity(parseXml(
      `<Entity id="3" kind="Record" name="r">
         <Property ref="1" importance="Obligatory"/>
         <Property ref="2" type="ListOf:Reference" importance="Fix">
           <Item value="7"/><Item value="8"/>
         </Property>
       </Entity>`
    ));
    expect(card.properties[0].values).toBeNull();
    expect(formatProperty(card.properties[0])).toBe("—");
    expect(card.properties[1].values).toEqual([{ value: "7", unit: undefined }, { value: "8", unit: undefined }]);
  });
});

describe("parseServerError", () => {
  it("extracts the parser position", () => {
    const error = parseServerError(parseXml('<Error position="15">expected a literal</Error>'));
    expect(error).toEqual({ message: "expected a literal", position: 15 });
  });
});

describe("backReferencesOf", () => {
  const article = (id: number, authorIds: number[]) =>
    parseEntity(parseXml(
      `<Entity id="${id}" kind="Record" name="article${id}">
         <Property ref="6" name="Author" type="${authorIds.length > 1 ? "ListOf:Reference" : "Reference"}"
                   importance="Fix" ${authorIds.length === 1 ? `value="${authorIds[0]}"` : ""}>
           ${authorIds.length > 1 ? authorIds.map((a) => `<Item value="${a}"/>`).join("") : ""}
         </Property>
       </Entity>`
    ));

  it("keeps only exact id matches, including inside lists", () => {
    const cards = [article(30, [19]), article(31, [20, 21])];
    expect(backReferencesOf(cards, 19).map((c) => c.id)).toEqual([30]);
    expect(backReferencesOf(cards, 21).map((c) => c.id)).toEqual([31]);
    expect(backReferencesOf(cards, 99)).toEqual([]);
  });

  it("ignores non-reference properties with coincidental values", () => {
    const card = parseEntity(parseXml(
      '<Entity id="5" kind="Record" name="r">' +
      '<Property ref="2" name="score" type="Integer" value="19" importance="Fix"/></Entity>'
    ));
    expect(backReferencesOf([card], 19)).toEqual([]);
  });
});

describe("sortRows", () => {
  const rows = [
    ["12", "b"],
    ["3", "a"],
    ["100", "a"],
  ];

  it("sorts numerically when the column is numeric", () => {
    expect(sortRows(rows, 0, false).map((r) => r[0])).toEqual(["3", "12", "100"]);
    expect(sortRows(rows, 0, true).map((r) => r[0])).toEqual(["100", "12", "3"]);
  });

  it("is stable on ties", () => {
    expect(sortRows(rows, 1, false)).toEqual([
      ["3", "a"],
      ["100", "a"],
      ["12", "b"],
    ]);
  });

  it("does not mutate its input", () => {
    const copy = rows.map((r) => [...r]);
    sortRows(rows, 0, true);
    expect(rows).toEqual(copy);
  });
});
